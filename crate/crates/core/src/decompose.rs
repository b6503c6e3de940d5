//! Deterministic intermediate representations and their inverses.
//!
//! Two decompositions are supported: serialized predicate-argument action
//! plans, and entity-anonymized stories where mention spans collapse to
//! placeholder tokens (`ent0`, `ent1`, ...). Both are pure transforms;
//! anonymization is exactly invertible through its placeholder table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{AnnotatedStory, CorefCluster, EntityMention, Span};
use crate::corpus::{
    parse_placeholder, placeholder_token, tokenize, Prompt, Scheme, Story, FRAME_DELIM,
    SENT_DELIM, UNK,
};

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("no fill for placeholder ent{id} occurrence {occurrence}")]
    MissingFill { id: usize, occurrence: usize },
    #[error("fill for placeholder ent{id} is empty")]
    EmptyFill { id: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table record: {0}")]
    MalformedTable(String),
}

/// A serialized action plan: one `<frame>`-delimited segment per predicate,
/// `<sent>` after each sentence's frames. `verb_positions` index the
/// predicate tokens, which always sit directly after a frame delimiter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlPlan {
    pub tokens: Vec<String>,
    pub verb_positions: Vec<usize>,
}

impl SrlPlan {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Serialize frames to a plan: per frame the predicate tokens come first,
/// then core arguments in role order (ARG0..ARG5); modifier arguments are
/// dropped. `verb_positions` records the first predicate token of each frame.
pub fn serialize_srl_plan(annotated: &AnnotatedStory) -> SrlPlan {
    let story = &annotated.story;
    let mut tokens = Vec::new();
    let mut verb_positions = Vec::new();
    let mut current_sentence: Option<usize> = None;
    for frame in &annotated.frames {
        if let Some(prev) = current_sentence {
            if frame.sentence_index != prev {
                tokens.push(SENT_DELIM.to_string());
            }
        }
        current_sentence = Some(frame.sentence_index);

        tokens.push(FRAME_DELIM.to_string());
        verb_positions.push(tokens.len());
        tokens.extend_from_slice(&story.tokens[frame.predicate.start..frame.predicate.end]);

        let mut core: Vec<(u8, Span)> = frame
            .arguments
            .iter()
            .filter_map(|(role, span)| match role {
                crate::annotate::RoleLabel::Core(n) => Some((*n, *span)),
                crate::annotate::RoleLabel::Modifier(_) => None,
            })
            .collect();
        core.sort_by_key(|(n, span)| (*n, span.start));
        for (_, span) in core {
            tokens.extend_from_slice(&story.tokens[span.start..span.end]);
        }
    }
    if current_sentence.is_some() {
        tokens.push(SENT_DELIM.to_string());
    }
    SrlPlan {
        tokens,
        verb_positions,
    }
}

/// Which anonymization produced a story.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnonScheme {
    Ner,
    Coref,
}

impl std::fmt::Display for AnonScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnonScheme::Ner => write!(f, "ner"),
            AnonScheme::Coref => write!(f, "coref"),
        }
    }
}

impl std::str::FromStr for AnonScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ner" => Ok(AnonScheme::Ner),
            "coref" => Ok(AnonScheme::Coref),
            other => Err(format!("unknown anonymization scheme: {other}")),
        }
    }
}

/// One placeholder occurrence: its position in the anonymized token sequence
/// and the gold surface string it replaced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSlot {
    pub position: usize,
    pub surface: String,
}

/// Ordered occurrence lists per placeholder id. Ids are contiguous from 0 in
/// order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderTable {
    pub entries: Vec<Vec<MentionSlot>>,
}

/// One placeholder occurrence with its ordinal within its placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub id: usize,
    pub occurrence: usize,
    pub position: usize,
    pub surface: String,
}

impl PlaceholderTable {
    pub fn placeholder_count(&self) -> usize {
        self.entries.len()
    }

    pub fn slots(&self, id: usize) -> &[MentionSlot] {
        &self.entries[id]
    }

    /// Gold fills reproducing the original story.
    pub fn gold_fills(&self) -> Fills {
        Fills::PerOccurrence(
            self.entries
                .iter()
                .enumerate()
                .map(|(id, slots)| (id, slots.iter().map(|s| s.surface.clone()).collect()))
                .collect(),
        )
    }

    /// All occurrences across placeholders, sorted by story position.
    pub fn occurrences_in_order(&self) -> Vec<Occurrence> {
        let mut out = Vec::new();
        for (id, slots) in self.entries.iter().enumerate() {
            for (occurrence, slot) in slots.iter().enumerate() {
                out.push(Occurrence {
                    id,
                    occurrence,
                    position: slot.position,
                    surface: slot.surface.clone(),
                });
            }
        }
        out.sort_by_key(|o| o.position);
        out
    }

    /// Gold per-id fills; valid for NER anonymization where every occurrence
    /// of a placeholder shares one surface string.
    pub fn gold_fills_per_id(&self) -> Fills {
        Fills::PerId(
            self.entries
                .iter()
                .enumerate()
                .filter_map(|(id, slots)| slots.first().map(|s| (id, s.surface.clone())))
                .collect(),
        )
    }
}

/// A story with mention spans replaced by placeholder tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymizedStory {
    pub tokens: Vec<String>,
    pub table: PlaceholderTable,
    pub scheme: AnonScheme,
    /// True when the story needed more placeholders than the cap; the
    /// overflow spans became `<unk>` and exact round-tripping is lost.
    pub overflowed: bool,
}

/// Keep the longer span on overlap; ties keep the earlier one.
fn resolve_overlaps(spans: &mut Vec<(Span, usize)>) {
    spans.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.start.cmp(&b.0.start)));
    let mut kept: Vec<(Span, usize)> = Vec::with_capacity(spans.len());
    for (span, tag) in spans.drain(..) {
        if !kept.iter().any(|(k, _)| k.overlaps(&span)) {
            kept.push((span, tag));
        }
    }
    kept.sort_by_key(|(s, _)| *s);
    *spans = kept;
}

fn replace_spans(
    story: &Story,
    spans_with_group: &[(Span, usize)],
    group_count: usize,
    scheme: AnonScheme,
    max_placeholders: usize,
) -> AnonymizedStory {
    let mut tokens = Vec::with_capacity(story.tokens.len());
    let mut entries: Vec<Vec<MentionSlot>> = vec![Vec::new(); group_count.min(max_placeholders)];
    let mut overflowed = false;
    let mut cursor = 0;
    for (span, group) in spans_with_group {
        tokens.extend_from_slice(&story.tokens[cursor..span.start]);
        let surface = story.tokens[span.start..span.end].join(" ");
        if *group < max_placeholders {
            entries[*group].push(MentionSlot {
                position: tokens.len(),
                surface,
            });
            tokens.push(placeholder_token(*group));
        } else {
            overflowed = true;
            tokens.push(UNK.to_string());
        }
        cursor = span.end;
    }
    tokens.extend_from_slice(&story.tokens[cursor..]);
    AnonymizedStory {
        tokens,
        table: PlaceholderTable { entries },
        scheme,
        overflowed,
    }
}

/// Replace each mention span with one placeholder token. Mentions with an
/// identical surface string (case-sensitive) share a placeholder; ids follow
/// first appearance. Overlapping mentions keep the longer, earlier span.
pub fn anonymize_ner(
    story: &Story,
    mentions: &[EntityMention],
    max_placeholders: usize,
) -> AnonymizedStory {
    let mut spans: Vec<(Span, usize)> = mentions.iter().map(|m| (m.span, 0)).collect();
    resolve_overlaps(&mut spans);

    let mut surface_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut assigned = Vec::with_capacity(spans.len());
    for (span, _) in &spans {
        let surface = story.tokens[span.start..span.end].join(" ");
        let next = surface_ids.len();
        let id = *surface_ids.entry(surface).or_insert(next);
        assigned.push((*span, id));
    }
    let group_count = surface_ids.len();
    replace_spans(story, &assigned, group_count, AnonScheme::Ner, max_placeholders)
}

/// Replace every span of a cluster with that cluster's placeholder, and give
/// each non-coreferent mention a fresh placeholder. Ids follow the first
/// textual appearance of each group.
pub fn anonymize_coref(
    story: &Story,
    clusters: &[CorefCluster],
    mentions: &[EntityMention],
    max_placeholders: usize,
) -> AnonymizedStory {
    // Group index: clusters first, then surviving singleton mentions.
    let mut spans: Vec<(Span, usize)> = Vec::new();
    for (ci, cluster) in clusters.iter().enumerate() {
        for span in &cluster.mentions {
            spans.push((*span, ci));
        }
    }
    let cluster_span_count = spans.len();
    let mut singleton_group = clusters.len();
    for mention in mentions {
        let covered = spans[..cluster_span_count]
            .iter()
            .any(|(s, _)| s.overlaps(&mention.span));
        if !covered {
            spans.push((mention.span, singleton_group));
            singleton_group += 1;
        }
    }
    resolve_overlaps(&mut spans);

    // Renumber groups by first textual appearance.
    let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
    let mut assigned = Vec::with_capacity(spans.len());
    for (span, group) in &spans {
        let next = renumber.len();
        let id = *renumber.entry(*group).or_insert(next);
        assigned.push((*span, id));
    }
    let group_count = renumber.len();
    replace_spans(
        story,
        &assigned,
        group_count,
        AnonScheme::Coref,
        max_placeholders,
    )
}

/// Surface strings to substitute for placeholders: one string per id (NER
/// scheme) or one per occurrence in textual order (coref scheme).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fills {
    PerId(BTreeMap<usize, String>),
    PerOccurrence(BTreeMap<usize, Vec<String>>),
}

impl Fills {
    fn get(&self, id: usize, occurrence: usize) -> Option<&str> {
        match self {
            Fills::PerId(map) => map.get(&id).map(String::as_str),
            Fills::PerOccurrence(map) => map
                .get(&id)
                .and_then(|v| v.get(occurrence))
                .map(String::as_str),
        }
    }
}

/// Replace every placeholder token with its fill, re-tokenized under the
/// word scheme. Placeholders are recognized syntactically (`entN`), so this
/// also applies to model-generated stories without a table.
pub fn deanonymize(tokens: &[String], fills: &Fills) -> Result<Vec<String>, DecomposeError> {
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens {
        match parse_placeholder(token) {
            Some(id) => {
                let occurrence = seen.entry(id).or_insert(0);
                let fill = fills
                    .get(id, *occurrence)
                    .ok_or(DecomposeError::MissingFill {
                        id,
                        occurrence: *occurrence,
                    })?;
                let fill_tokens = tokenize(fill, Scheme::Word);
                if fill_tokens.is_empty() {
                    return Err(DecomposeError::EmptyFill { id });
                }
                out.extend(fill_tokens);
                *occurrence += 1;
            }
            None => out.push(token.clone()),
        }
    }
    Ok(out)
}

/// The decomposition used for a training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionScheme {
    SrlPlan,
    NerAnon,
    CorefAnon,
}

impl std::str::FromStr for DecompositionScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "srl-plan" => Ok(DecompositionScheme::SrlPlan),
            "ner-anon" => Ok(DecompositionScheme::NerAnon),
            "coref-anon" => Ok(DecompositionScheme::CorefAnon),
            other => Err(format!("unknown decomposition scheme: {other}")),
        }
    }
}

/// The deterministic posterior for one example: the intermediate `z*` and
/// the target story `x`, yielding the training pairs (prompt -> z*) and
/// (z* -> x) whose losses the decomposition bounds.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub prompt_tokens: Vec<String>,
    pub intermediate: Vec<String>,
    pub story_tokens: Vec<String>,
    pub plan: Option<SrlPlan>,
    pub anonymized: Option<AnonymizedStory>,
}

/// Build the intermediate representation for one annotated example.
pub fn build_posterior(
    prompt: &Prompt,
    annotated: &AnnotatedStory,
    scheme: DecompositionScheme,
    max_placeholders: usize,
) -> Posterior {
    let story_tokens = annotated.story.tokens.clone();
    match scheme {
        DecompositionScheme::SrlPlan => {
            let plan = serialize_srl_plan(annotated);
            Posterior {
                prompt_tokens: prompt.tokens.clone(),
                intermediate: plan.tokens.clone(),
                story_tokens,
                plan: Some(plan),
                anonymized: None,
            }
        }
        DecompositionScheme::NerAnon => {
            let anon = anonymize_ner(&annotated.story, &annotated.mentions, max_placeholders);
            Posterior {
                prompt_tokens: prompt.tokens.clone(),
                intermediate: anon.tokens.clone(),
                story_tokens,
                plan: None,
                anonymized: Some(anon),
            }
        }
        DecompositionScheme::CorefAnon => {
            let anon = anonymize_coref(
                &annotated.story,
                &annotated.clusters,
                &annotated.mentions,
                max_placeholders,
            );
            Posterior {
                prompt_tokens: prompt.tokens.clone(),
                intermediate: anon.tokens.clone(),
                story_tokens,
                plan: None,
                anonymized: Some(anon),
            }
        }
    }
}

/// Sidecar record tying a placeholder table to its line in a token file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRecord {
    pub line: usize,
    pub scheme: AnonScheme,
    pub table: PlaceholderTable,
}

pub fn write_table_file(path: &Path, records: &[TableRecord]) -> Result<(), DecomposeError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("table records serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| DecomposeError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_table_file(path: &Path) -> Result<Vec<TableRecord>, DecomposeError> {
    let text = std::fs::read_to_string(path).map_err(|source| DecomposeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| DecomposeError::MalformedTable(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{
        annotate_story, default_verb_lexicon, import_annotations, AnnotationRecord, Gazetteer,
    };

    fn mention(story: &Story, start: usize, end: usize) -> EntityMention {
        EntityMention {
            span: Span::new(start, end),
            label: crate::annotate::EntityLabel::Person,
            surface: story.tokens[start..end].to_vec(),
        }
    }

    #[test]
    fn plan_places_verb_first_with_canonical_args() {
        let story = Story::new("John ate the cake .");
        let record: AnnotationRecord = serde_json::from_str(
            r#"{"frames":[{"predicate":[1,2],"sentence":0,
                "args":[{"role":"ARG1","span":[2,4]},{"role":"ARG0","span":[0,1]},
                        {"role":"ARGM-TMP","span":[4,5]}]}]}"#,
        )
        .unwrap();
        let annotated = import_annotations(&story, &record).unwrap();
        let plan = serialize_srl_plan(&annotated);
        // ARG0 precedes ARG1 even though ARG1 comes first in the record;
        // the ARGM modifier is dropped.
        assert_eq!(
            plan.tokens,
            vec![FRAME_DELIM, "ate", "John", "the", "cake", SENT_DELIM]
        );
        assert_eq!(plan.verb_positions, vec![1]);
    }

    #[test]
    fn frameless_story_gives_empty_plan() {
        let story = Story::new("Nothing happened anywhere .");
        let annotated = import_annotations(&story, &AnnotationRecord::default()).unwrap();
        assert!(serialize_srl_plan(&annotated).is_empty());
    }

    #[test]
    fn plan_verbs_follow_frame_delimiters() {
        let story = Story::new("John ate bread . Mary drank wine and Mary slept .");
        let annotated = annotate_story(&story, &default_verb_lexicon(), &Gazetteer::new());
        let plan = serialize_srl_plan(&annotated);
        assert!(!plan.verb_positions.is_empty());
        for &v in &plan.verb_positions {
            assert_eq!(plan.tokens[v - 1], FRAME_DELIM);
        }
        let delim_positions: Vec<usize> = plan
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| *t == FRAME_DELIM)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(plan.verb_positions, delim_positions);
    }

    #[test]
    fn ner_anonymization_shares_placeholders_for_identical_strings() {
        let story = Story::new("Bilbo Baggins met Bilbo .");
        let mentions = vec![mention(&story, 0, 2), mention(&story, 3, 4)];
        let anon = anonymize_ner(&story, &mentions, 64);
        assert_eq!(anon.tokens, vec!["ent0", "met", "ent1", "."]);

        let story = Story::new("John saw John .");
        let mentions = vec![mention(&story, 0, 1), mention(&story, 2, 3)];
        let anon = anonymize_ner(&story, &mentions, 64);
        assert_eq!(anon.tokens, vec!["ent0", "saw", "ent0", "."]);
        assert_eq!(anon.table.placeholder_count(), 1);
        assert_eq!(anon.table.slots(0).len(), 2);
    }

    #[test]
    fn ner_no_mentions_is_identity_with_empty_table() {
        let story = Story::new("nothing to hide here .");
        let anon = anonymize_ner(&story, &[], 64);
        assert_eq!(anon.tokens, story.tokens);
        assert_eq!(anon.table.placeholder_count(), 0);
    }

    #[test]
    fn coref_anonymization_collapses_clusters_and_keeps_singletons() {
        let story = Story::new("Bilbo Baggins went . he slept . the hobbit woke . Gondor fell .");
        let cluster = CorefCluster {
            mentions: vec![Span::new(0, 2), Span::new(4, 5), Span::new(7, 9)],
        };
        let singleton = mention(&story, 11, 12); // Gondor
        let anon = anonymize_coref(&story, &[cluster], &[singleton], 64);
        assert_eq!(
            anon.tokens,
            vec![
                "ent0", "went", ".", "ent0", "slept", ".", "ent0", "woke", ".", "ent1", "fell",
                "."
            ]
        );
        assert_eq!(anon.table.slots(0).len(), 3);
        assert_eq!(anon.table.slots(0)[2].surface, "the hobbit");
        assert_eq!(anon.table.slots(1)[0].surface, "Gondor");
    }

    #[test]
    fn coref_identity_without_clusters_or_mentions() {
        let story = Story::new("quiet day in the village .");
        let anon = anonymize_coref(&story, &[], &[], 64);
        assert_eq!(anon.tokens, story.tokens);
        assert!(!anon.overflowed);
    }

    #[test]
    fn deanonymize_round_trips_gold_fills() {
        let story = Story::new("Bilbo Baggins met Frodo . Later Frodo waved at Bilbo Baggins .");
        let mentions = vec![
            mention(&story, 0, 2),
            mention(&story, 3, 4),
            mention(&story, 6, 7),
            mention(&story, 9, 11),
        ];
        let anon = anonymize_ner(&story, &mentions, 64);
        let restored = deanonymize(&anon.tokens, &anon.table.gold_fills()).unwrap();
        assert_eq!(restored, story.tokens);
        // NER scheme also round-trips with one fill per id.
        let restored = deanonymize(&anon.tokens, &anon.table.gold_fills_per_id()).unwrap();
        assert_eq!(restored, story.tokens);
    }

    #[test]
    fn deanonymize_missing_fill_is_an_error() {
        let tokens: Vec<String> = ["ent0", "met", "ent1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut map = BTreeMap::new();
        map.insert(0, "Bilbo".to_string());
        let err = deanonymize(&tokens, &Fills::PerId(map)).unwrap_err();
        assert!(matches!(err, DecomposeError::MissingFill { id: 1, .. }));
    }

    #[test]
    fn multi_token_fill_retokenizes() {
        let tokens: Vec<String> = ["ent0", "slept", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut map = BTreeMap::new();
        map.insert(0, "Samwise the Brave".to_string());
        let out = deanonymize(&tokens, &Fills::PerId(map)).unwrap();
        assert_eq!(out, vec!["Samwise", "the", "Brave", "slept", "."]);
    }

    #[test]
    fn overflow_past_cap_flags_and_unks() {
        let story = Story::new("Ann met Bob near Cal and Dia .");
        let mentions = vec![
            mention(&story, 0, 1),
            mention(&story, 2, 3),
            mention(&story, 4, 5),
            mention(&story, 6, 7),
        ];
        let anon = anonymize_ner(&story, &mentions, 2);
        assert!(anon.overflowed);
        assert_eq!(anon.table.placeholder_count(), 2);
        assert_eq!(anon.tokens.iter().filter(|t| *t == UNK).count(), 2);
    }

    #[test]
    fn overlap_resolution_keeps_longer_then_earlier() {
        let story = Story::new("East Gondor City fell .");
        let mentions = vec![
            mention(&story, 0, 2),
            mention(&story, 1, 3), // same length, later start: dropped
        ];
        let anon = anonymize_ner(&story, &mentions, 64);
        assert_eq!(anon.tokens, vec!["ent0", "City", "fell", "."]);
    }

    #[test]
    fn posterior_pairs_by_scheme() {
        let prompt = Prompt::new("a tale");
        let story = Story::new("We saw Frodo eat bread . Then he slept .");
        let annotated = annotate_story(&story, &default_verb_lexicon(), &Gazetteer::new());
        let srl = build_posterior(&prompt, &annotated, DecompositionScheme::SrlPlan, 64);
        assert_eq!(srl.intermediate, serialize_srl_plan(&annotated).tokens);
        assert_eq!(srl.story_tokens, story.tokens);

        let ner = build_posterior(&prompt, &annotated, DecompositionScheme::NerAnon, 64);
        assert!(ner.anonymized.is_some());
        assert_ne!(ner.intermediate, ner.story_tokens);

        let coref = build_posterior(&prompt, &annotated, DecompositionScheme::CorefAnon, 64);
        let anon = coref.anonymized.unwrap();
        let restored = deanonymize(&anon.tokens, &anon.table.gold_fills()).unwrap();
        assert_eq!(restored, story.tokens);
    }

    #[test]
    fn placeholder_numbering_is_monotone_in_first_appearance() {
        let story = Story::new("Ann met Bob . Bob met Ann . Cal met Ann .");
        let mentions = vec![
            mention(&story, 0, 1),
            mention(&story, 2, 3),
            mention(&story, 4, 5),
            mention(&story, 6, 7),
            mention(&story, 8, 9),
            mention(&story, 10, 11),
        ];
        let anon = anonymize_ner(&story, &mentions, 64);
        let mut firsts = Vec::new();
        for id in 0..anon.table.placeholder_count() {
            firsts.push(anon.table.slots(id)[0].position);
        }
        let mut sorted = firsts.clone();
        sorted.sort_unstable();
        assert_eq!(firsts, sorted);
    }

    #[test]
    fn table_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tables.jsonl");
        let story = Story::new("John saw John .");
        let mentions = vec![mention(&story, 0, 1), mention(&story, 2, 3)];
        let anon = anonymize_ner(&story, &mentions, 64);
        let records = vec![TableRecord {
            line: 0,
            scheme: AnonScheme::Ner,
            table: anon.table.clone(),
        }];
        write_table_file(&path, &records).unwrap();
        let loaded = read_table_file(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].table, anon.table);
    }
}
