//! Serialized annotation records and their validation.
//!
//! One JSON record per story, line-delimited. Spans are `[start, end)` pairs
//! of word-token indices into the paired story line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Story;

use super::{
    AnnotateError, AnnotatedStory, CorefCluster, EntityLabel, EntityMention, RoleLabel, Span,
    SrlFrame,
};

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct AnnotationRecord {
    #[serde(default)]
    pub frames: Vec<FrameRecord>,
    #[serde(default)]
    pub mentions: Vec<MentionRecord>,
    #[serde(default)]
    pub clusters: Vec<Vec<[usize; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrameRecord {
    pub predicate: [usize; 2],
    pub sentence: usize,
    #[serde(default)]
    pub args: Vec<ArgRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArgRecord {
    pub role: String,
    pub span: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MentionRecord {
    pub span: [usize; 2],
    pub label: String,
}

fn check_span(raw: [usize; 2], len: usize) -> Result<Span, AnnotateError> {
    let [start, end] = raw;
    if start >= end || end > len {
        return Err(AnnotateError::SpanOutOfRange { start, end, len });
    }
    Ok(Span::new(start, end))
}

fn parse_entity_label(s: &str) -> Result<EntityLabel, AnnotateError> {
    match s {
        "PERSON" => Ok(EntityLabel::Person),
        "ORG" => Ok(EntityLabel::Org),
        "LOC" => Ok(EntityLabel::Loc),
        other => Err(AnnotateError::UnknownEntityLabel(other.to_string())),
    }
}

fn entity_label_str(label: EntityLabel) -> &'static str {
    match label {
        EntityLabel::Person => "PERSON",
        EntityLabel::Org => "ORG",
        EntityLabel::Loc => "LOC",
    }
}

/// Validate a record against its story and build the annotated form.
///
/// Every span is range-checked, frame arguments must stay inside their
/// predicate's sentence, clusters must hold at least two non-overlapping
/// mentions, and frames come out sorted by `(sentence, predicate start)`.
pub fn import_annotations(
    story: &Story,
    record: &AnnotationRecord,
) -> Result<AnnotatedStory, AnnotateError> {
    let len = story.tokens.len();

    let mut frames = Vec::with_capacity(record.frames.len());
    for fr in &record.frames {
        let predicate = check_span(fr.predicate, len)?;
        if fr.sentence >= story.sentence_count() {
            return Err(AnnotateError::SentenceOutOfRange {
                index: fr.sentence,
                sentences: story.sentence_count(),
            });
        }
        let (sent_start, sent_end) = story.sentence_range(fr.sentence);
        let in_sentence = |span: &Span| span.start >= sent_start && span.end <= sent_end;
        if !in_sentence(&predicate) {
            return Err(AnnotateError::ArgumentOutsideSentence {
                start: predicate.start,
                end: predicate.end,
                sentence: fr.sentence,
            });
        }
        let mut arguments = Vec::with_capacity(fr.args.len());
        for arg in &fr.args {
            let role = RoleLabel::parse(&arg.role)
                .ok_or_else(|| AnnotateError::UnknownRole(arg.role.clone()))?;
            let span = check_span(arg.span, len)?;
            if !in_sentence(&span) {
                return Err(AnnotateError::ArgumentOutsideSentence {
                    start: span.start,
                    end: span.end,
                    sentence: fr.sentence,
                });
            }
            arguments.push((role, span));
        }
        frames.push(SrlFrame {
            predicate,
            arguments,
            sentence_index: fr.sentence,
        });
    }
    frames.sort_by_key(|f| (f.sentence_index, f.predicate.start));

    let mut mentions = Vec::with_capacity(record.mentions.len());
    for m in &record.mentions {
        let span = check_span(m.span, len)?;
        let label = parse_entity_label(&m.label)?;
        mentions.push(EntityMention {
            span,
            label,
            surface: story.tokens[span.start..span.end].to_vec(),
        });
    }
    mentions.sort_by_key(|m| (m.span.start, m.span.end));

    let mut clusters = Vec::with_capacity(record.clusters.len());
    for (ci, raw) in record.clusters.iter().enumerate() {
        if raw.len() < 2 {
            return Err(AnnotateError::SingletonCluster(ci));
        }
        let mut spans = raw
            .iter()
            .map(|&s| check_span(s, len))
            .collect::<Result<Vec<_>, _>>()?;
        spans.sort();
        for pair in spans.windows(2) {
            if pair[0].overlaps(&pair[1]) {
                return Err(AnnotateError::OverlappingClusterMentions {
                    cluster: ci,
                    a_start: pair[0].start,
                    a_end: pair[0].end,
                    b_start: pair[1].start,
                    b_end: pair[1].end,
                });
            }
        }
        clusters.push(CorefCluster { mentions: spans });
    }
    clusters.sort_by_key(|c| c.mentions[0]);

    Ok(AnnotatedStory {
        story: story.clone(),
        frames,
        mentions,
        clusters,
    })
}

/// Serialize annotations back to the record shape; inverse of
/// [`import_annotations`] on valid inputs.
pub fn export_annotations(annotated: &AnnotatedStory) -> AnnotationRecord {
    AnnotationRecord {
        frames: annotated
            .frames
            .iter()
            .map(|f| FrameRecord {
                predicate: [f.predicate.start, f.predicate.end],
                sentence: f.sentence_index,
                args: f
                    .arguments
                    .iter()
                    .map(|(role, span)| ArgRecord {
                        role: role.to_string(),
                        span: [span.start, span.end],
                    })
                    .collect(),
            })
            .collect(),
        mentions: annotated
            .mentions
            .iter()
            .map(|m| MentionRecord {
                span: [m.span.start, m.span.end],
                label: entity_label_str(m.label).to_string(),
            })
            .collect(),
        clusters: annotated
            .clusters
            .iter()
            .map(|c| c.mentions.iter().map(|s| [s.start, s.end]).collect())
            .collect(),
    }
}

/// Read a line-delimited annotation file; one record per story, in order.
pub fn read_annotation_file(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let text = std::fs::read_to_string(path).map_err(|source| AnnotateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| AnnotateError::Malformed(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_annotation_file(
    path: &Path,
    records: &[AnnotationRecord],
) -> Result<(), AnnotateError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("annotation records serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| AnnotateError::Io {
        path: path.display().to_string(),
        source,
    })
}
