//! Diversity and coherence metrics over annotated stories.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotate::{AnnotatedStory, VerbLexicon};

use super::lcs::lcs_stats;
use super::EvaluateError;

fn collapse_doubled_consonant(stem: &str) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2
        && chars[n - 1] == chars[n - 2]
        && chars[n - 1].is_ascii_alphabetic()
        && !"aeiou".contains(chars[n - 1])
    {
        chars[..n - 1].iter().collect()
    } else {
        stem.to_string()
    }
}

/// Verb lemma for a word form: the lexicon decides when it knows the form
/// (unifying irregulars like ate/eats/eating), otherwise small suffix rules
/// approximate: -ies to -y, -ing/-ed stripped with doubled consonants
/// collapsed, sibilant -es and plain -s stripped.
pub fn lemmatize(form: &str, lexicon: &VerbLexicon) -> String {
    let lower = form.to_lowercase();
    if let Some(lemma) = lexicon.lemma(&lower) {
        return lemma.to_string();
    }
    let n = lower.len();
    if n > 4 && lower.ends_with("ies") {
        return format!("{}y", &lower[..n - 3]);
    }
    if n > 5 && lower.ends_with("ing") {
        return collapse_doubled_consonant(&lower[..n - 3]);
    }
    if n > 4 && lower.ends_with("ed") {
        return collapse_doubled_consonant(&lower[..n - 2]);
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if n > suffix.len() + 1 && lower.ends_with(suffix) {
            return lower[..n - 2].to_string();
        }
    }
    if n > 3 && lower.ends_with('s') && !lower.ends_with("ss") {
        return lower[..n - 1].to_string();
    }
    lower
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbDiversity {
    /// Mean count of distinct verb lemmas per story.
    pub unique_verbs_per_story: f64,
    /// Percent of verb tokens whose lemma is outside the corpus's top-5
    /// most frequent lemmas (top 5 computed over the evaluated corpus).
    pub diverse_verb_pct: f64,
    /// The top-5 lemmas, most frequent first; ties prefer the smaller lemma.
    pub top_lemmas: Vec<String>,
}

fn predicate_lemma(story: &AnnotatedStory, frame_index: usize, lexicon: &VerbLexicon) -> String {
    let frame = &story.frames[frame_index];
    // Multi-token predicates contribute their first token.
    lemmatize(&story.story.tokens[frame.predicate.start], lexicon)
}

/// Verb-diversity metrics over a corpus of annotated stories.
pub fn verb_diversity(
    stories: &[AnnotatedStory],
    lexicon: &VerbLexicon,
) -> Result<VerbDiversity, EvaluateError> {
    if stories.is_empty() {
        return Err(EvaluateError::EmptyCorpus);
    }
    let mut lemma_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut unique_sum = 0usize;
    let mut verb_tokens = 0usize;
    for story in stories {
        let mut story_lemmas = BTreeSet::new();
        for i in 0..story.frames.len() {
            let lemma = predicate_lemma(story, i, lexicon);
            *lemma_counts.entry(lemma.clone()).or_insert(0) += 1;
            story_lemmas.insert(lemma);
            verb_tokens += 1;
        }
        unique_sum += story_lemmas.len();
    }
    let mut ranked: Vec<(&String, &usize)> = lemma_counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let top_lemmas: Vec<String> = ranked.iter().take(5).map(|(l, _)| (*l).clone()).collect();

    let mut diverse = 0usize;
    for story in stories {
        for i in 0..story.frames.len() {
            if !top_lemmas.contains(&predicate_lemma(story, i, lexicon)) {
                diverse += 1;
            }
        }
    }
    let diverse_verb_pct = if verb_tokens == 0 {
        0.0
    } else {
        100.0 * diverse as f64 / verb_tokens as f64
    };
    Ok(VerbDiversity {
        unique_verbs_per_story: unique_sum as f64 / stories.len() as f64,
        diverse_verb_pct,
        top_lemmas,
    })
}

/// Mean count of distinct entity-name strings per story (case-sensitive).
pub fn entity_name_diversity(stories: &[AnnotatedStory]) -> Result<f64, EvaluateError> {
    if stories.is_empty() {
        return Err(EvaluateError::EmptyCorpus);
    }
    let total: usize = stories
        .iter()
        .map(|s| {
            s.mentions
                .iter()
                .map(|m| m.surface_text())
                .collect::<BTreeSet<_>>()
                .len()
        })
        .sum();
    Ok(total as f64 / stories.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorefStats {
    /// Mean count of non-singleton chains per story.
    pub chains_per_story: f64,
    /// Mean over stories of the story's mean distinct mention strings per
    /// chain; a story without chains contributes 0 rather than being
    /// skipped.
    pub unique_names_per_chain: f64,
}

pub fn coref_cluster_stats(stories: &[AnnotatedStory]) -> Result<CorefStats, EvaluateError> {
    if stories.is_empty() {
        return Err(EvaluateError::EmptyCorpus);
    }
    let mut chain_sum = 0usize;
    let mut names_sum = 0.0;
    for story in stories {
        chain_sum += story.clusters.len();
        if story.clusters.is_empty() {
            continue; // contributes 0 to names_sum
        }
        let mut per_chain = 0.0;
        for cluster in &story.clusters {
            let names: BTreeSet<String> = cluster
                .mentions
                .iter()
                .map(|span| story.story.tokens[span.start..span.end].join(" "))
                .collect();
            per_chain += names.len() as f64;
        }
        names_sum += per_chain / story.clusters.len() as f64;
    }
    Ok(CorefStats {
        chains_per_story: chain_sum as f64 / stories.len() as f64,
        unique_names_per_chain: names_sum / stories.len() as f64,
    })
}

/// Mean per-story max and average LCS of generated stories against the
/// training set.
pub fn corpus_lcs(
    generated: &[Vec<String>],
    training: &[Vec<String>],
) -> Result<(f64, f64), EvaluateError> {
    if generated.is_empty() {
        return Err(EvaluateError::EmptyCorpus);
    }
    let mut max_sum = 0.0;
    let mut avg_sum = 0.0;
    for story in generated {
        let stats = lcs_stats(story, training);
        max_sum += stats.max as f64;
        avg_sum += stats.mean;
    }
    let n = generated.len() as f64;
    Ok((max_sum / n, avg_sum / n))
}
