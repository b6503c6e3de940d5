//! Longest common subsequence against a training corpus.
//!
//! The hot loop interns tokens to integer ids and runs a two-row DP; the
//! sweep over training stories shards across threads with an exact
//! (max, sum) reduction, so results do not depend on thread count.

use rayon::prelude::*;
use std::collections::HashMap;

/// LCS length of two id sequences, O(n*m) time, O(min-row) memory.
pub fn lcs_len_ids(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    for &ai in a {
        for (j, &bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as usize
}

/// LCS length over string tokens.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let mut intern_a: Vec<u32> = Vec::with_capacity(a.len());
    for t in a {
        let next = ids.len() as u32;
        intern_a.push(*ids.entry(t.as_str()).or_insert(next));
    }
    // Tokens absent from `a` can never match; collapse them to a sentinel.
    let b_ids: Vec<u32> = b
        .iter()
        .map(|t| ids.get(t.as_str()).copied().unwrap_or(u32::MAX))
        .collect();
    lcs_len_ids(&intern_a, &b_ids)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcsStats {
    pub max: usize,
    pub mean: f64,
}

/// Max and mean LCS of one story against every training story.
pub fn lcs_stats(generated: &[String], training: &[Vec<String>]) -> LcsStats {
    if training.is_empty() {
        return LcsStats { max: 0, mean: 0.0 };
    }
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let mut gen_ids: Vec<u32> = Vec::with_capacity(generated.len());
    for t in generated {
        let next = ids.len() as u32;
        gen_ids.push(*ids.entry(t.as_str()).or_insert(next));
    }
    let (max, total) = training
        .par_iter()
        .map(|story| {
            let s_ids: Vec<u32> = story
                .iter()
                .map(|t| ids.get(t.as_str()).copied().unwrap_or(u32::MAX))
                .collect();
            let l = lcs_len_ids(&gen_ids, &s_ids);
            (l, l)
        })
        .reduce(|| (0usize, 0usize), |a, b| (a.0.max(b.0), a.1 + b.1));
    LcsStats {
        max,
        mean: total as f64 / training.len() as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Exponential reference: feasible for lengths <= 12.
    fn lcs_brute(a: &[u32], b: &[u32]) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        if a[0] == b[0] {
            1 + lcs_brute(&a[1..], &b[1..])
        } else {
            lcs_brute(&a[1..], b).max(lcs_brute(a, &b[1..]))
        }
    }

    #[test]
    fn story_against_itself_is_its_length() {
        let a = toks("the quick brown fox jumps");
        assert_eq!(lcs_len(&a, &a), a.len());
    }

    #[test]
    fn disjoint_vocabularies_share_nothing() {
        assert_eq!(lcs_len(&toks("a b c"), &toks("x y z")), 0);
    }

    #[test]
    fn textbook_example() {
        assert_eq!(lcs_len(&toks("a b c d e"), &toks("a c e")), 3);
    }

    #[test]
    fn stats_aggregate_max_and_mean() {
        let generated = toks("a b c d");
        let training = vec![toks("a b c d"), toks("a x c"), toks("q")];
        let stats = lcs_stats(&generated, &training);
        assert_eq!(stats.max, 4);
        assert!((stats.mean - (4.0 + 2.0 + 0.0) / 3.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn prop_dp_matches_brute_force(
            a in proptest::collection::vec(0u32..5, 0..=12),
            b in proptest::collection::vec(0u32..5, 0..=12),
        ) {
            prop_assert_eq!(lcs_len_ids(&a, &b), lcs_brute(&a, &b));
        }

        #[test]
        fn prop_symmetry_and_monotonicity(
            a in proptest::collection::vec(0u32..4, 0..=10),
            b in proptest::collection::vec(0u32..4, 0..=10),
            extra in 0u32..4,
        ) {
            prop_assert_eq!(lcs_len_ids(&a, &b), lcs_len_ids(&b, &a));
            let mut longer = a.clone();
            longer.push(extra);
            prop_assert!(lcs_len_ids(&longer, &b) >= lcs_len_ids(&a, &b));
        }
    }
}
