//! Story annotations: SRL frames, entity mentions, coreference clusters.
//!
//! Annotations either come from externally produced records (see
//! [`AnnotationRecord`]) or from the built-in heuristic annotators in
//! [`heuristics`], so the pipeline runs without pretrained parsers. Token
//! indices always refer to the word-scheme tokenization of the story.

mod heuristics;
mod schema;

pub use heuristics::{
    annotate_story, default_pronouns, default_verb_lexicon, heuristic_coref, heuristic_ner,
    heuristic_srl, Gazetteer, VerbLexicon,
};
pub use schema::{
    export_annotations, import_annotations, read_annotation_file, write_annotation_file,
    AnnotationRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Story;

/// Half-open token span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end).contains(&pos)
    }
}

/// PropBank-style role label: `ARG0..ARG5` are core, `ARGM-*` are modifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RoleLabel {
    Core(u8),
    Modifier(String),
}

impl RoleLabel {
    pub fn parse(s: &str) -> Option<RoleLabel> {
        if let Some(rest) = s.strip_prefix("ARGM-") {
            if rest.is_empty() {
                return None;
            }
            return Some(RoleLabel::Modifier(rest.to_string()));
        }
        if let Some(rest) = s.strip_prefix("ARG") {
            if rest.len() == 1 {
                let d = rest.as_bytes()[0];
                if (b'0'..=b'5').contains(&d) {
                    return Some(RoleLabel::Core(d - b'0'));
                }
            }
        }
        None
    }

    pub fn is_core(&self) -> bool {
        matches!(self, RoleLabel::Core(_))
    }
}

impl std::fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RoleLabel::Core(n) => write!(f, "ARG{n}"),
            RoleLabel::Modifier(m) => write!(f, "ARGM-{m}"),
        }
    }
}

/// One predicate with its labeled arguments, confined to a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlFrame {
    pub predicate: Span,
    pub arguments: Vec<(RoleLabel, Span)>,
    pub sentence_index: usize,
}

/// Entity mention categories recognized by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityLabel {
    #[serde(rename = "PERSON")]
    Person,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "LOC")]
    Loc,
}

/// A named-entity mention; `surface` mirrors the story tokens at `span`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub span: Span,
    pub label: EntityLabel,
    pub surface: Vec<String>,
}

impl EntityMention {
    pub fn surface_text(&self) -> String {
        self.surface.join(" ")
    }
}

/// Mentions of one entity, ordered by start index. Always has at least two
/// members; singletons are not clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefCluster {
    pub mentions: Vec<Span>,
}

/// A story bundled with all three annotation layers. Frames are sorted by
/// `(sentence_index, predicate.start)`.
#[derive(Debug, Clone)]
pub struct AnnotatedStory {
    pub story: Story,
    pub frames: Vec<SrlFrame>,
    pub mentions: Vec<EntityMention>,
    pub clusters: Vec<CorefCluster>,
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("span [{start}, {end}) out of range for story of {len} tokens")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("unknown role label {0:?}")]
    UnknownRole(String),
    #[error("unknown entity label {0:?}")]
    UnknownEntityLabel(String),
    #[error("sentence index {index} out of range ({sentences} sentences)")]
    SentenceOutOfRange { index: usize, sentences: usize },
    #[error("argument span [{start}, {end}) outside sentence {sentence}")]
    ArgumentOutsideSentence {
        start: usize,
        end: usize,
        sentence: usize,
    },
    #[error("cluster {cluster} has overlapping mentions [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingClusterMentions {
        cluster: usize,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("cluster {0} has fewer than two mentions")]
    SingletonCluster(usize),
    #[error("malformed annotation record: {0}")]
    Malformed(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("annotation file has {records} records for {stories} stories")]
    RecordCountMismatch { records: usize, stories: usize },
}
