//! Rule-based fallback annotators.
//!
//! These stand in for pretrained SRL/NER/coreference systems so tests and
//! demos run hermetically. They are deterministic pure functions; accuracy
//! is explicitly not a goal.

use std::collections::HashMap;

use crate::corpus::Story;

use super::{AnnotatedStory, CorefCluster, EntityLabel, EntityMention, RoleLabel, Span, SrlFrame};

/// Pronouns that attach to the nearest preceding coreference cluster.
pub fn default_pronouns() -> Vec<&'static str> {
    vec![
        "he", "she", "it", "they", "him", "her", "them", "his", "hers", "its", "their",
    ]
}

/// Maps word forms to verb lemmas; a form's presence flags it as a verb.
#[derive(Debug, Clone, Default)]
pub struct VerbLexicon {
    forms: HashMap<String, String>,
}

impl VerbLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a lemma along with regular inflections and any extra
    /// irregular forms.
    pub fn add(&mut self, lemma: &str, irregular: &[&str]) {
        for form in regular_forms(lemma) {
            self.forms.entry(form).or_insert_with(|| lemma.to_string());
        }
        for form in irregular {
            self.forms
                .entry((*form).to_string())
                .or_insert_with(|| lemma.to_string());
        }
    }

    pub fn is_verb(&self, token: &str) -> bool {
        self.forms.contains_key(&token.to_lowercase())
    }

    pub fn lemma(&self, token: &str) -> Option<&str> {
        self.forms.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

fn ends_in_consonant_y(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b'y' && !matches!(b[b.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Regular inflections: third person -s/-es, past -ed, gerund -ing, with
/// e-drop and consonant+y handling. Doubling forms (stopped, running) must
/// be added as irregulars.
fn regular_forms(lemma: &str) -> Vec<String> {
    let mut out = vec![lemma.to_string()];
    let third = if ends_in_consonant_y(lemma) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else if lemma.ends_with('s')
        || lemma.ends_with('x')
        || lemma.ends_with('z')
        || lemma.ends_with("ch")
        || lemma.ends_with("sh")
        || lemma.ends_with('o')
    {
        format!("{lemma}es")
    } else {
        format!("{lemma}s")
    };
    out.push(third);
    let past = if lemma.ends_with('e') {
        format!("{lemma}d")
    } else if ends_in_consonant_y(lemma) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else {
        format!("{lemma}ed")
    };
    out.push(past);
    let gerund = if lemma.ends_with('e') && !lemma.ends_with("ee") {
        format!("{}ing", &lemma[..lemma.len() - 1])
    } else {
        format!("{lemma}ing")
    };
    out.push(gerund);
    out
}

/// A built-in lexicon of common narrative verbs with irregular past forms.
pub fn default_verb_lexicon() -> VerbLexicon {
    let mut lex = VerbLexicon::new();
    let entries: &[(&str, &[&str])] = &[
        ("eat", &["ate", "eaten"]),
        ("walk", &[]),
        ("run", &["ran", "running"]),
        ("say", &["said"]),
        ("see", &["saw", "seen"]),
        ("go", &["went", "gone"]),
        ("come", &["came"]),
        ("take", &["took", "taken"]),
        ("make", &["made"]),
        ("give", &["gave", "given"]),
        ("find", &["found"]),
        ("think", &["thought"]),
        ("know", &["knew", "known"]),
        ("look", &[]),
        ("want", &[]),
        ("tell", &["told"]),
        ("ask", &[]),
        ("feel", &["felt"]),
        ("leave", &["left"]),
        ("call", &[]),
        ("try", &[]),
        ("need", &[]),
        ("become", &["became"]),
        ("turn", &[]),
        ("start", &[]),
        ("stop", &["stopped", "stopping"]),
        ("open", &[]),
        ("close", &[]),
        ("smile", &[]),
        ("laugh", &[]),
        ("cry", &["cried"]),
        ("shout", &[]),
        ("whisper", &[]),
        ("sit", &["sat", "sitting"]),
        ("stand", &["stood"]),
        ("fall", &["fell", "fallen"]),
        ("rise", &["rose", "risen"]),
        ("jump", &[]),
        ("climb", &[]),
        ("drive", &["drove", "driven"]),
        ("ride", &["rode", "ridden"]),
        ("fly", &["flew", "flown"]),
        ("swim", &["swam", "swum", "swimming"]),
        ("fight", &["fought"]),
        ("win", &["won", "winning"]),
        ("lose", &["lost"]),
        ("meet", &["met"]),
        ("follow", &[]),
        ("lead", &["led"]),
        ("carry", &["carried"]),
        ("hold", &["held"]),
        ("drop", &["dropped", "dropping"]),
        ("throw", &["threw", "thrown"]),
        ("catch", &["caught"]),
        ("push", &[]),
        ("pull", &[]),
        ("break", &["broke", "broken"]),
        ("build", &["built"]),
        ("write", &["wrote", "written"]),
        ("read", &[]),
        ("sing", &["sang", "sung"]),
        ("dance", &[]),
        ("sleep", &["slept"]),
        ("wake", &["woke", "woken"]),
        ("dream", &["dreamt"]),
        ("die", &["dying"]),
        ("live", &[]),
        ("love", &[]),
        ("hate", &[]),
        ("fear", &[]),
        ("hope", &[]),
        ("wait", &[]),
        ("watch", &[]),
        ("listen", &[]),
        ("hear", &["heard"]),
        ("speak", &["spoke", "spoken"]),
        ("answer", &[]),
        ("reply", &["replied"]),
        ("remember", &[]),
        ("forget", &["forgot", "forgotten", "forgetting"]),
        ("learn", &[]),
        ("teach", &["taught"]),
        ("help", &[]),
        ("save", &[]),
        ("steal", &["stole", "stolen"]),
        ("hide", &["hid", "hidden"]),
        ("seek", &["sought"]),
        ("search", &[]),
        ("discover", &[]),
        ("return", &[]),
        ("arrive", &[]),
        ("travel", &[]),
        ("escape", &[]),
        ("chase", &[]),
        ("grab", &["grabbed", "grabbing"]),
        ("reach", &[]),
        ("touch", &[]),
        ("point", &[]),
        ("nod", &["nodded", "nodding"]),
        ("shake", &["shook", "shaken"]),
        ("sigh", &[]),
        ("gasp", &[]),
        ("scream", &[]),
        ("wonder", &[]),
        ("decide", &[]),
        ("promise", &[]),
        ("refuse", &[]),
        ("agree", &[]),
        ("vanish", &[]),
        ("appear", &[]),
        ("knock", &[]),
        ("bring", &["brought"]),
        ("drink", &["drank", "drunk"]),
        ("begin", &["began", "begun", "beginning"]),
        ("visit", &[]),
        ("guard", &[]),
        ("rule", &[]),
        ("explore", &[]),
        ("rescue", &[]),
        ("betray", &[]),
        ("trust", &[]),
        ("warn", &[]),
        ("greet", &[]),
    ];
    for (lemma, irregular) in entries {
        lex.add(lemma, irregular);
    }
    lex
}

/// Words that terminate an argument chunk (conjunctions, prepositions,
/// auxiliaries). Determiners and pronouns are deliberately absent so chunks
/// like "the cake" or "it" survive.
const CHUNK_BOUNDARY_WORDS: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "when", "then", "than",
    "as", "that", "which", "who", "whom", "whose", "where", "why", "how", "to", "of", "in", "on",
    "at", "by", "for", "with", "from", "into", "onto", "over", "under", "after", "before",
    "about", "against", "between", "through", "during", "without", "within", "upon", "across",
    "behind", "beyond", "near", "since", "until", "toward", "towards", "off", "out", "up",
    "down", "around", "along", "among", "above", "below", "beside", "inside", "outside", "is",
    "am", "are", "was", "were", "be", "been", "being", "do", "does", "did", "have", "has", "had",
    "will", "would", "shall", "should", "can", "could", "may", "might", "must", "not", "n't",
    "no", "there",
];

fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_punctuation())
}

fn is_chunk_boundary(token: &str, lexicon: &VerbLexicon) -> bool {
    is_punctuation_token(token)
        || lexicon.is_verb(token)
        || CHUNK_BOUNDARY_WORDS.contains(&token.to_lowercase().as_str())
}

/// Per sentence, each lexicon verb becomes a predicate; ARG0 is the nearest
/// chunk left of it and ARG1 the nearest chunk right of it, where chunks are
/// maximal runs of non-boundary tokens.
pub fn heuristic_srl(story: &Story, lexicon: &VerbLexicon) -> Vec<SrlFrame> {
    let mut frames = Vec::new();
    for sentence in 0..story.sentence_count() {
        let (start, end) = story.sentence_range(sentence);
        for v in start..end {
            if !lexicon.is_verb(&story.tokens[v]) {
                continue;
            }
            let mut arguments = Vec::new();
            // Nearest chunk to the left.
            let mut j = v;
            while j > start && is_chunk_boundary(&story.tokens[j - 1], lexicon) {
                j -= 1;
            }
            if j > start {
                let chunk_end = j;
                let mut i = j;
                while i > start && !is_chunk_boundary(&story.tokens[i - 1], lexicon) {
                    i -= 1;
                }
                arguments.push((RoleLabel::Core(0), Span::new(i, chunk_end)));
            }
            // Nearest chunk to the right.
            let mut j = v + 1;
            while j < end && is_chunk_boundary(&story.tokens[j], lexicon) {
                j += 1;
            }
            if j < end {
                let chunk_start = j;
                let mut i = j;
                while i < end && !is_chunk_boundary(&story.tokens[i], lexicon) {
                    i += 1;
                }
                arguments.push((RoleLabel::Core(1), Span::new(chunk_start, i)));
            }
            frames.push(SrlFrame {
                predicate: Span::new(v, v + 1),
                arguments,
                sentence_index: sentence,
            });
        }
    }
    frames
}

/// Phrase gazetteer mapping lowercase token sequences to entity labels.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    phrases: Vec<(Vec<String>, EntityLabel)>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, phrase: &str, label: EntityLabel) {
        let tokens: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
        if !tokens.is_empty() {
            self.phrases.push((tokens, label));
        }
        // Longest phrases match first.
        self.phrases.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
    }

    fn match_at(&self, tokens: &[String], pos: usize) -> Option<(usize, EntityLabel)> {
        for (phrase, label) in &self.phrases {
            if pos + phrase.len() <= tokens.len()
                && phrase
                    .iter()
                    .zip(&tokens[pos..pos + phrase.len()])
                    .all(|(p, t)| *p == t.to_lowercase())
            {
                return Some((phrase.len(), *label));
            }
        }
        None
    }

    /// Label for an exact full-surface match, if any.
    fn label_for(&self, surface: &[String]) -> Option<EntityLabel> {
        let lowered: Vec<String> = surface.iter().map(|t| t.to_lowercase()).collect();
        self.phrases
            .iter()
            .find(|(p, _)| *p == lowered)
            .map(|(_, l)| *l)
    }
}

/// Capitalized tokens that are never entity mentions.
fn ner_excluded(token: &str) -> bool {
    let lower = token.to_lowercase();
    matches!(
        lower.as_str(),
        "i" | "i'm" | "i'll" | "i've" | "i'd" | "we" | "you" | "us"
    ) || default_pronouns().contains(&lower.as_str())
}

/// Maximal runs of capitalized, non-sentence-initial tokens plus gazetteer
/// hits. Runs default to PERSON unless the gazetteer knows the full surface;
/// gazetteer matches win on overlap.
pub fn heuristic_ner(story: &Story, gazetteer: &Gazetteer) -> Vec<EntityMention> {
    let tokens = &story.tokens;
    let mut sentence_initial = vec![false; tokens.len()];
    if !tokens.is_empty() {
        sentence_initial[0] = true;
        for &b in &story.sentence_boundaries {
            if b < tokens.len() {
                sentence_initial[b] = true;
            }
        }
    }

    let mut mentions: Vec<EntityMention> = Vec::new();
    // Gazetteer pass: greedy longest match, left to right.
    let mut i = 0;
    while i < tokens.len() {
        if let Some((len, label)) = gazetteer.match_at(tokens, i) {
            let span = Span::new(i, i + len);
            mentions.push(EntityMention {
                span,
                label,
                surface: tokens[i..i + len].to_vec(),
            });
            i += len;
        } else {
            i += 1;
        }
    }

    // Capitalization pass.
    let qualifies = |i: usize| {
        !sentence_initial[i]
            && tokens[i]
                .chars()
                .next()
                .map(char::is_uppercase)
                .unwrap_or(false)
            && !ner_excluded(&tokens[i])
    };
    let mut i = 0;
    while i < tokens.len() {
        if qualifies(i) {
            let start = i;
            while i < tokens.len() && qualifies(i) {
                i += 1;
            }
            let span = Span::new(start, i);
            if !mentions.iter().any(|m| m.span.overlaps(&span)) {
                let surface = tokens[start..i].to_vec();
                let label = gazetteer
                    .label_for(&surface)
                    .unwrap_or(EntityLabel::Person);
                mentions.push(EntityMention {
                    span,
                    label,
                    surface,
                });
            }
        } else {
            i += 1;
        }
    }
    mentions.sort_by_key(|m| (m.span.start, m.span.end));
    mentions
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Do two mention surfaces co-refer? Either the lowercased strings match or
/// one surface appears as a contiguous token subsequence of the other
/// (covering both "Bilbo" in "Bilbo Baggins" and shared head tokens).
fn surfaces_match(a: &[String], b: &[String]) -> bool {
    let la: Vec<String> = a.iter().map(|t| t.to_lowercase()).collect();
    let lb: Vec<String> = b.iter().map(|t| t.to_lowercase()).collect();
    if la == lb {
        return true;
    }
    let (short, long) = if la.len() <= lb.len() {
        (&la, &lb)
    } else {
        (&lb, &la)
    };
    long.windows(short.len()).any(|w| w == short.as_slice())
}

/// Cluster mentions by surface matching, then attach each pronoun occurrence
/// to the cluster of the nearest preceding mention. Groups that end up with
/// fewer than two members are dropped.
pub fn heuristic_coref(
    mentions: &[EntityMention],
    story: &Story,
    pronouns: &[&str],
) -> Vec<CorefCluster> {
    if mentions.is_empty() {
        return Vec::new();
    }
    let mut uf = UnionFind::new(mentions.len());
    for i in 0..mentions.len() {
        for j in i + 1..mentions.len() {
            if surfaces_match(&mentions[i].surface, &mentions[j].surface) {
                uf.union(i, j);
            }
        }
    }

    let mut groups: HashMap<usize, Vec<Span>> = HashMap::new();
    for (i, m) in mentions.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(m.span);
    }

    // Pronoun occurrences outside mention spans attach to the group of the
    // nearest preceding mention.
    for (pos, token) in story.tokens.iter().enumerate() {
        let lower = token.to_lowercase();
        if !pronouns.contains(&lower.as_str()) {
            continue;
        }
        if mentions.iter().any(|m| m.span.contains(pos)) {
            continue;
        }
        let nearest = mentions
            .iter()
            .enumerate()
            .filter(|(_, m)| m.span.end <= pos)
            .max_by_key(|(_, m)| m.span.start);
        if let Some((idx, _)) = nearest {
            let root = uf.find(idx);
            groups
                .get_mut(&root)
                .expect("mention group exists")
                .push(Span::new(pos, pos + 1));
        }
    }

    let mut clusters: Vec<CorefCluster> = groups
        .into_values()
        .filter(|spans| spans.len() >= 2)
        .map(|mut spans| {
            spans.sort();
            CorefCluster { mentions: spans }
        })
        .collect();
    clusters.sort_by_key(|c| c.mentions[0]);
    clusters
}

/// Run all three heuristic annotators over a story.
pub fn annotate_story(story: &Story, lexicon: &VerbLexicon, gazetteer: &Gazetteer) -> AnnotatedStory {
    let frames = heuristic_srl(story, lexicon);
    let mentions = heuristic_ner(story, gazetteer);
    let pronouns = default_pronouns();
    let clusters = heuristic_coref(&mentions, story, &pronouns);
    AnnotatedStory {
        story: story.clone(),
        frames,
        mentions,
        clusters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srl_extracts_subject_and_object_chunks() {
        let story = Story::new("John ate the cake .");
        let frames = heuristic_srl(&story, &default_verb_lexicon());
        assert_eq!(frames.len(), 1);
        let f = &frames[0];
        assert_eq!(f.predicate, Span::new(1, 2));
        assert_eq!(
            f.arguments,
            vec![
                (RoleLabel::Core(0), Span::new(0, 1)),
                (RoleLabel::Core(1), Span::new(2, 4)),
            ]
        );
    }

    #[test]
    fn srl_no_lexicon_verb_no_frame() {
        let story = Story::new("The weather seemed rather gray .");
        assert!(heuristic_srl(&story, &default_verb_lexicon()).is_empty());
    }

    #[test]
    fn srl_two_verbs_two_frames_in_order() {
        let story = Story::new("John ate bread and Mary drank wine .");
        let frames = heuristic_srl(&story, &default_verb_lexicon());
        assert_eq!(frames.len(), 2);
        assert!(frames[0].predicate.start < frames[1].predicate.start);
        assert_eq!(frames[1].arguments[0], (RoleLabel::Core(0), Span::new(4, 5)));
    }

    #[test]
    fn ner_finds_capitalized_runs_mid_sentence() {
        let story = Story::new("Later she met Bilbo Baggins there .");
        let mentions = heuristic_ner(&story, &Gazetteer::new());
        assert_eq!(mentions.len(), 1);
        assert_eq!(mentions[0].surface, vec!["Bilbo", "Baggins"]);
        assert_eq!(mentions[0].label, EntityLabel::Person);
    }

    #[test]
    fn ner_lowercase_story_has_no_mentions() {
        let story = Story::new("nobody important went anywhere today .");
        assert!(heuristic_ner(&story, &Gazetteer::new()).is_empty());
    }

    #[test]
    fn ner_gazetteer_hits_lowercase_text() {
        let story = Story::new("the road to gondor was long .");
        let mut gaz = Gazetteer::new();
        gaz.add("gondor", EntityLabel::Loc);
        let mentions = heuristic_ner(&story, &gaz);
        assert_eq!(mentions.len(), 1);
        assert_eq!(mentions[0].label, EntityLabel::Loc);
        assert_eq!(mentions[0].surface, vec!["gondor"]);
    }

    #[test]
    fn ner_skips_sentence_initial_and_pronouns() {
        let story = Story::new("Frodo left . He met Sam and I stayed .");
        let mentions = heuristic_ner(&story, &Gazetteer::new());
        // "Frodo" is sentence-initial, "He" and "I" are excluded.
        assert_eq!(mentions.len(), 1);
        assert_eq!(mentions[0].surface, vec!["Sam"]);
    }

    #[test]
    fn coref_clusters_head_token_matches() {
        let story = Story::new("Once upon Bilbo Baggins lived . Later on Bilbo slept .");
        let mentions = heuristic_ner(&story, &Gazetteer::new());
        assert_eq!(mentions.len(), 2);
        let clusters = heuristic_coref(&mentions, &story, &default_pronouns());
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].mentions.len(), 2);
    }

    #[test]
    fn coref_distinct_names_stay_singletons() {
        let story = Story::new("It was Bilbo who waved and also Gandalf who left .");
        let mentions = heuristic_ner(&story, &Gazetteer::new());
        assert_eq!(mentions.len(), 2);
        // "It" sits before either mention, so no pronoun attaches to them.
        let clusters = heuristic_coref(&mentions, &story, &default_pronouns());
        assert!(clusters.is_empty());
    }

    #[test]
    fn coref_pronoun_attaches_to_nearest_antecedent() {
        let story = Story::new("We saw Frodo yesterday . Later he slept well .");
        let mentions = heuristic_ner(&story, &Gazetteer::new());
        assert_eq!(mentions.len(), 1);
        let clusters = heuristic_coref(&mentions, &story, &default_pronouns());
        assert_eq!(clusters.len(), 1);
        let spans = &clusters[0].mentions;
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1].len(), 1); // the pronoun
        assert_eq!(story.tokens[spans[1].start], "he");
    }

    #[test]
    fn annotators_are_deterministic() {
        let story = Story::new("We saw Frodo near Bilbo Baggins . Then he met Bilbo again .");
        let lex = default_verb_lexicon();
        let gaz = Gazetteer::new();
        let a = annotate_story(&story, &lex, &gaz);
        let b = annotate_story(&story, &lex, &gaz);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.mentions, b.mentions);
        assert_eq!(a.clusters, b.clusters);
    }
}
