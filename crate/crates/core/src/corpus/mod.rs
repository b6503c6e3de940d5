//! Dataset ingestion, tokenization, and vocabulary construction.
//!
//! Datasets are two aligned UTF-8 text files (prompts and stories), one
//! example per line. The literal token `<newline>` encodes in-story line
//! breaks and is treated as an ordinary token throughout.

mod bpe;
mod vocab;

pub use bpe::{learn_bpe, segment_text, segment_word, BpeMerges, END_OF_WORD};
pub use vocab::{
    build_vocab, parse_placeholder, placeholder_token, SpecialTokens, Vocabulary,
    VocabularyError, BOS, EOS, FRAME_DELIM, NULL_SLOT, PAD, SENT_DELIM, UNK,
};

use std::path::Path;
use thiserror::Error;

/// Marker standing in for a space in character-level tokenization.
pub const SPACE_MARKER: &str = "\u{2581}";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line count mismatch: {source_lines} source lines vs {target_lines} target lines")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("empty {side} on line {line} (1-based)")]
    EmptyLine { side: &'static str, line: usize },
}

/// Tokenization granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Word,
    Bpe,
    Character,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Word => write!(f, "word"),
            Scheme::Bpe => write!(f, "bpe"),
            Scheme::Character => write!(f, "character"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Scheme::Word),
            "bpe" => Ok(Scheme::Bpe),
            "character" | "char" => Ok(Scheme::Character),
            other => Err(format!("unknown tokenization scheme: {other}")),
        }
    }
}

/// A conditioning prompt. `text` is the normalized form: tokens joined by
/// single spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Prompt {
    pub fn new(text: &str) -> Self {
        let tokens = tokenize(text, Scheme::Word);
        let text = tokens.join(" ");
        Prompt { text, tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A story with sentence boundaries over its word tokens.
///
/// `sentence_boundaries` holds strictly increasing end indices: sentence `i`
/// spans `tokens[boundaries[i-1]..boundaries[i]]` (with an implicit 0 start).
/// The final boundary always equals the token count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Story {
    pub text: String,
    pub tokens: Vec<String>,
    pub sentence_boundaries: Vec<usize>,
}

impl Story {
    pub fn new(text: &str) -> Self {
        Self::from_tokens(tokenize(text, Scheme::Word))
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let text = tokens.join(" ");
        let sentence_boundaries = sentence_boundaries(&tokens);
        Story {
            text,
            tokens,
            sentence_boundaries,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_boundaries.len()
    }

    /// Token range `[start, end)` of sentence `index`.
    pub fn sentence_range(&self, index: usize) -> (usize, usize) {
        let start = if index == 0 {
            0
        } else {
            self.sentence_boundaries[index - 1]
        };
        (start, self.sentence_boundaries[index])
    }

    /// Index of the sentence containing token position `pos`.
    pub fn sentence_of(&self, pos: usize) -> usize {
        self.sentence_boundaries
            .iter()
            .position(|&b| pos < b)
            .unwrap_or(self.sentence_boundaries.len().saturating_sub(1))
    }
}

/// One prompt/story pair.
#[derive(Debug, Clone)]
pub struct ParallelExample {
    pub prompt: Prompt,
    pub story: Story,
}

/// Tokens that end a sentence.
pub fn is_sentence_ender(token: &str) -> bool {
    matches!(token, "." | "!" | "?")
}

/// Closing quotes that may trail a sentence ender and stay inside the
/// sentence.
pub fn is_closing_quote(token: &str) -> bool {
    matches!(token, "\"" | "'")
}

/// Per-token closing-quote flags: a quote token closes when an odd number of
/// the same quote character precedes it (straight quotes carry no direction
/// of their own).
pub fn closing_quote_flags(tokens: &[String]) -> Vec<bool> {
    let mut double = 0usize;
    let mut single = 0usize;
    tokens
        .iter()
        .map(|t| match t.as_str() {
            "\"" => {
                double += 1;
                double.is_multiple_of(2)
            }
            "'" => {
                single += 1;
                single.is_multiple_of(2)
            }
            _ => false,
        })
        .collect()
}

/// Sentence end indices for a token sequence. A boundary sits after each run
/// of sentence enders plus any trailing closing quotes; the final boundary is
/// always the token count.
pub fn sentence_boundaries(tokens: &[String]) -> Vec<usize> {
    let closing = closing_quote_flags(tokens);
    let mut bounds = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if is_sentence_ender(&tokens[i]) {
            let mut j = i + 1;
            while j < tokens.len() && (is_sentence_ender(&tokens[j]) || closing[j]) {
                j += 1;
            }
            bounds.push(j);
            i = j;
        } else {
            i += 1;
        }
    }
    if !tokens.is_empty() && bounds.last() != Some(&tokens.len()) {
        bounds.push(tokens.len());
    }
    bounds
}

/// True for atomic angle-bracket markers such as `<newline>` or `<sent>`.
pub fn is_marker_token(chunk: &str) -> bool {
    chunk.len() > 2 && chunk.starts_with('<') && chunk.ends_with('>')
}

/// Tokenize `text` under the given scheme.
///
/// Word scheme: split on whitespace, then peel leading/trailing ASCII
/// punctuation into separate tokens; angle-bracket markers stay atomic.
/// Character scheme: one token per character with [`SPACE_MARKER`] standing
/// in for spaces (lossless under [`detokenize`]). BPE without a merge table
/// degenerates to per-word character segmentation with [`END_OF_WORD`]
/// markers.
pub fn tokenize(text: &str, scheme: Scheme) -> Vec<String> {
    match scheme {
        Scheme::Word => tokenize_word(text),
        Scheme::Character => tokenize_char(text),
        Scheme::Bpe => segment_text(text, &BpeMerges::empty()),
    }
}

fn tokenize_word(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_marker_token(chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        let mut leading = Vec::new();
        while start < end && chars[start].is_ascii_punctuation() {
            leading.push(chars[start].to_string());
            start += 1;
        }
        let mut trailing = Vec::new();
        while end > start && chars[end - 1].is_ascii_punctuation() {
            trailing.push(chars[end - 1].to_string());
            end -= 1;
        }
        out.extend(leading);
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        trailing.reverse();
        out.extend(trailing);
    }
    out
}

fn tokenize_char(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| {
            if c == ' ' {
                SPACE_MARKER.to_string()
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Inverse of [`tokenize`] where one exists. Exact for the character scheme;
/// best-effort (single-space joins) for words.
pub fn detokenize(tokens: &[String], scheme: Scheme) -> String {
    match scheme {
        Scheme::Word => tokens.join(" "),
        Scheme::Character => tokens
            .iter()
            .map(|t| if t == SPACE_MARKER { " " } else { t.as_str() })
            .collect(),
        Scheme::Bpe => {
            let joined: String = tokens.concat();
            let spaced = joined.replace(END_OF_WORD, " ");
            spaced.trim_end().to_string()
        }
    }
}

/// Load a line-aligned prompt/story dataset.
pub fn load_dataset(
    source_path: &Path,
    target_path: &Path,
) -> Result<Vec<ParallelExample>, CorpusError> {
    let read = |path: &Path| -> Result<String, CorpusError> {
        std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let source = read(source_path)?;
    let target = read(target_path)?;
    let source_lines: Vec<&str> = source.lines().collect();
    let target_lines: Vec<&str> = target.lines().collect();
    if source_lines.len() != target_lines.len() {
        return Err(CorpusError::LineCountMismatch {
            source_lines: source_lines.len(),
            target_lines: target_lines.len(),
        });
    }
    let mut examples = Vec::with_capacity(source_lines.len());
    for (i, (s, t)) in source_lines.iter().zip(&target_lines).enumerate() {
        let prompt = Prompt::new(s);
        let story = Story::new(t);
        if prompt.is_empty() {
            return Err(CorpusError::EmptyLine {
                side: "prompt",
                line: i + 1,
            });
        }
        if story.is_empty() {
            return Err(CorpusError::EmptyLine {
                side: "story",
                line: i + 1,
            });
        }
        examples.push(ParallelExample { prompt, story });
    }
    Ok(examples)
}

/// Keep the first `max_words` tokens and recompute sentence boundaries.
pub fn truncate_story(story: &Story, max_words: usize) -> Story {
    assert!(max_words >= 1, "max_words must be at least 1");
    if story.tokens.len() <= max_words {
        return story.clone();
    }
    Story::from_tokens(story.tokens[..max_words].to_vec())
}
