//! Token vocabularies with a fixed special-token inventory.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use thiserror::Error;

use super::Scheme;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
/// Delimiter between sentences of an action plan.
pub const SENT_DELIM: &str = "<sent>";
/// Delimiter opening each predicate-argument frame; also reused as a field
/// separator in reference-filler inputs.
pub const FRAME_DELIM: &str = "<frame>";
/// Reserved slot attended to when a mask row allows nothing else.
pub const NULL_SLOT: &str = "<null>";

/// Placeholder token for abstract entity `id` (`ent0`, `ent1`, ...).
pub fn placeholder_token(id: usize) -> String {
    format!("ent{id}")
}

/// Parse `entN` back to `N`.
pub fn parse_placeholder(token: &str) -> Option<usize> {
    let rest = token.strip_prefix("ent")?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// The special-token inventory every vocabulary carries: control tokens plus
/// the `ent0..entK-1` placeholder family and the null-attention slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    pub placeholder_count: usize,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        // Per-story placeholder cap; stories needing more overflow to <unk>.
        SpecialTokens {
            placeholder_count: 64,
        }
    }
}

impl SpecialTokens {
    pub fn tokens(&self) -> Vec<String> {
        let mut toks: Vec<String> = [PAD, UNK, BOS, EOS, SENT_DELIM, FRAME_DELIM, NULL_SLOT]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for i in 0..self.placeholder_count {
            toks.push(placeholder_token(i));
        }
        toks
    }

    pub fn count(&self) -> usize {
        7 + self.placeholder_count
    }
}

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("token id {0} out of range")]
    InvalidId(u32),
    #[error("max_size {max_size} must exceed the {specials} special tokens")]
    TooSmall { max_size: usize, specials: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// An ordered token inventory. Index 0 is always `<pad>`; specials occupy a
/// fixed prefix, frequency-ranked corpus tokens follow.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    scheme: Scheme,
    entries: Vec<String>,
    index: HashMap<String, u32>,
    specials: SpecialTokens,
}

impl Vocabulary {
    fn from_entries(scheme: Scheme, entries: Vec<String>, specials: SpecialTokens) -> Self {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, t) in entries.iter().enumerate() {
            let prev = index.insert(t.clone(), i as u32);
            debug_assert!(prev.is_none(), "duplicate vocabulary entry {t:?}");
        }
        Vocabulary {
            scheme,
            entries,
            index,
            specials,
        }
    }

    /// A vocabulary holding only the special tokens.
    pub fn specials_only(scheme: Scheme, specials: SpecialTokens) -> Self {
        let entries = specials.tokens();
        Self::from_entries(scheme, entries, specials)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn placeholder_count(&self) -> usize {
        self.specials.placeholder_count
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|s| s.as_str())
    }

    pub fn pad_id(&self) -> u32 {
        0
    }
    pub fn unk_id(&self) -> u32 {
        1
    }
    pub fn bos_id(&self) -> u32 {
        2
    }
    pub fn eos_id(&self) -> u32 {
        3
    }
    pub fn sent_id(&self) -> u32 {
        4
    }
    pub fn frame_id(&self) -> u32 {
        5
    }
    pub fn null_id(&self) -> u32 {
        6
    }

    pub fn placeholder_id(&self, placeholder: usize) -> Option<u32> {
        if placeholder < self.specials.placeholder_count {
            Some(7 + placeholder as u32)
        } else {
            None
        }
    }

    /// If `id` is a placeholder token, its placeholder index.
    pub fn placeholder_of(&self, id: u32) -> Option<usize> {
        let i = id as usize;
        if (7..7 + self.specials.placeholder_count).contains(&i) {
            Some(i - 7)
        } else {
            None
        }
    }

    /// Map tokens to ids, falling back to `<unk>`.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t).unwrap_or_else(|| self.unk_id()))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>, VocabularyError> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(VocabularyError::InvalidId(id))
            })
            .collect()
    }

    /// One token per line, index = line number.
    pub fn save(&self, path: &Path) -> Result<(), VocabularyError> {
        let mut out = String::new();
        for t in &self.entries {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| VocabularyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(
        path: &Path,
        scheme: Scheme,
        specials: SpecialTokens,
    ) -> Result<Self, VocabularyError> {
        let text = std::fs::read_to_string(path).map_err(|source| VocabularyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let entries: Vec<String> = text.lines().map(str::to_string).collect();
        Ok(Self::from_entries(scheme, entries, specials))
    }
}

/// Build a vocabulary from tokenized examples.
///
/// Keeps the most frequent tokens up to `max_size` total entries (specials
/// included); frequency ties prefer the lexicographically smaller token.
/// Counting is order-independent, so any permutation of `corpus` yields the
/// same vocabulary.
pub fn build_vocab(
    corpus: &[Vec<String>],
    scheme: Scheme,
    max_size: usize,
    specials: SpecialTokens,
) -> Result<Vocabulary, VocabularyError> {
    if max_size <= specials.count() {
        return Err(VocabularyError::TooSmall {
            max_size,
            specials: specials.count(),
        });
    }
    let special_set: Vec<String> = specials.tokens();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for example in corpus {
        for token in example {
            if special_set.iter().any(|s| s == token) {
                continue;
            }
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let budget = max_size - special_set.len();
    let mut entries = special_set;
    entries.extend(ranked.into_iter().take(budget).map(|(t, _)| t.to_string()));
    Ok(Vocabulary::from_entries(scheme, entries, specials))
}
