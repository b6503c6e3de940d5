//! Byte-pair encoding over word-tokenized text.
//!
//! Words are split into single characters with [`END_OF_WORD`] appended to
//! the word-final subunit, then the most frequent adjacent symbol pair is
//! merged greedily. Ties break lexicographically so learning is
//! deterministic.

use std::collections::BTreeMap;
use std::path::Path;

use super::{tokenize, Scheme};

/// Suffix appended to word-final subunits; makes detokenization lossless at
/// the word level.
pub const END_OF_WORD: &str = "</w>";

/// An ordered BPE merge table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeMerges(pub Vec<(String, String)>);

impl BpeMerges {
    pub fn empty() -> Self {
        BpeMerges(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One merge per line as `left right`.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        for (l, r) in &self.0 {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut merges = Vec::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (l, r) = line.split_once(' ').ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("malformed merge line: {line:?}"),
                )
            })?;
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(BpeMerges(merges))
    }
}

fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut symbols: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

fn apply_merge(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let merged = format!("{}{}", symbols[i], symbols[i + 1]);
            symbols[i] = merged;
            symbols.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

/// Learn `num_merges` merges from a corpus of text lines.
///
/// Each iteration merges the pair with the highest total frequency across
/// word types (weighted by word frequency); equal counts prefer the
/// lexicographically smaller `(left, right)` pair. Stops early when no pair
/// occurs.
pub fn learn_bpe(corpus: &[String], num_merges: usize) -> BpeMerges {
    let mut word_freq: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for line in corpus {
        for word in tokenize(line, Scheme::Word) {
            *word_freq.entry(word_symbols(&word)).or_insert(0) += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = word_freq.into_iter().collect();

    let mut merges = Vec::new();
    for _ in 0..num_merges {
        let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (symbols, freq) in &words {
            for pair in symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += freq;
            }
        }
        // BTreeMap iterates in ascending pair order, so keeping strict
        // `>` picks the lexicographically smallest pair among ties.
        let mut best: Option<(&(String, String), u64)> = None;
        for (pair, count) in &pair_counts {
            match best {
                Some((_, c)) if *count <= c => {}
                _ => best = Some((pair, *count)),
            }
        }
        let Some((pair, _)) = best else { break };
        let (left, right) = pair.clone();
        for (symbols, _) in &mut words {
            apply_merge(symbols, &left, &right);
        }
        merges.push((left, right));
    }
    BpeMerges(merges)
}

/// Segment one word with a merge table.
pub fn segment_word(word: &str, merges: &BpeMerges) -> Vec<String> {
    let mut symbols = word_symbols(word);
    for (l, r) in &merges.0 {
        apply_merge(&mut symbols, l, r);
    }
    symbols
}

/// Word-tokenize `text` and segment every word.
pub fn segment_text(text: &str, merges: &BpeMerges) -> Vec<String> {
    tokenize(text, Scheme::Word)
        .iter()
        .flat_map(|w| segment_word(w, merges))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::detokenize;
    use proptest::prelude::*;

    /// Independent greedy oracle: rescans every pair with nested loops and
    /// explicit (count desc, pair asc) selection.
    fn oracle_learn(corpus: &[String], num_merges: usize) -> Vec<(String, String)> {
        let mut words: Vec<Vec<String>> = Vec::new();
        for line in corpus {
            for w in tokenize(line, Scheme::Word) {
                words.push(word_symbols(&w));
            }
        }
        let mut merges = Vec::new();
        for _ in 0..num_merges {
            let mut counts: Vec<((String, String), u64)> = Vec::new();
            for word in &words {
                for i in 0..word.len().saturating_sub(1) {
                    let key = (word[i].clone(), word[i + 1].clone());
                    match counts.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((key, 1)),
                    }
                }
            }
            if counts.is_empty() {
                break;
            }
            counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let (l, r) = counts[0].0.clone();
            for word in &mut words {
                apply_merge(word, &l, &r);
            }
            merges.push((l, r));
        }
        merges
    }

    #[test]
    fn zero_merges_is_character_segmentation() {
        let merges = learn_bpe(&["abc ab".to_string()], 0);
        assert!(merges.is_empty());
        assert_eq!(
            segment_word("abc", &merges),
            vec!["a", "b", &format!("c{END_OF_WORD}")]
        );
    }

    #[test]
    fn repeated_pair_merges_first() {
        let corpus = vec!["aaaa".to_string(); 100];
        let merges = learn_bpe(&corpus, 1);
        assert_eq!(merges.0, vec![("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn matches_oracle_on_small_corpus() {
        let corpus = vec![
            "low lower lowest".to_string(),
            "new newer newest".to_string(),
            "low low newer".to_string(),
        ];
        for n in [0, 1, 3, 8, 20] {
            assert_eq!(learn_bpe(&corpus, n).0, oracle_learn(&corpus, n), "n={n}");
        }
    }

    #[test]
    fn segmentation_detokenizes_to_words() {
        let corpus = vec!["the cat sat on the mat".to_string()];
        let merges = learn_bpe(&corpus, 10);
        let toks = segment_text("the cat sat", &merges);
        assert_eq!(detokenize(&toks, Scheme::Bpe), "the cat sat");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn prop_matches_oracle(words in proptest::collection::vec("[ab]{1,6}", 1..12), n in 0usize..12) {
            let corpus = vec![words.join(" ")];
            prop_assert!(corpus[0].len() <= 1000);
            prop_assert_eq!(learn_bpe(&corpus, n).0, oracle_learn(&corpus, n));
        }
    }
}
