//! Entity-ranking harness: can the filler pick the true mention out of a
//! lineup of distractors?

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::decompose::AnonymizedStory;
use crate::model::{mention_context, FillModel, MentionContext};

use super::EvaluateError;

/// Scores a candidate surface string for a mention context; higher is more
/// likely.
pub trait MentionScorer {
    fn score(&mut self, ctx: &MentionContext, candidate: &str) -> f64;
}

impl MentionScorer for FillModel {
    fn score(&mut self, ctx: &MentionContext, candidate: &str) -> f64 {
        self.score_mention(ctx, candidate)
    }
}

/// One ranking trial: a mention context, its gold surface string, and
/// whether this is the placeholder's first mention.
#[derive(Debug, Clone)]
pub struct RankingCase {
    pub ctx: MentionContext,
    pub gold: String,
    pub is_first: bool,
}

/// Build ranking cases from gold anonymized stories: one case per
/// placeholder occurrence, with gold previous references.
pub fn ranking_cases(stories: &[AnonymizedStory], window: usize) -> Vec<RankingCase> {
    let mut cases = Vec::new();
    for anon in stories {
        for occ in anon.table.occurrences_in_order() {
            let previous: Vec<String> = anon.table.slots(occ.id)[..occ.occurrence]
                .iter()
                .map(|s| s.surface.clone())
                .collect();
            let ctx = mention_context(&anon.tokens, occ.position, occ.id, previous, window);
            cases.push(RankingCase {
                ctx,
                gold: occ.surface,
                is_first: occ.occurrence == 0,
            });
        }
    }
    cases
}

/// Accuracy split by first vs subsequent mentions. A tie with the gold
/// string counts as a failure; empty splits report 0 accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingAccuracy {
    pub first_correct: usize,
    pub first_total: usize,
    pub subsequent_correct: usize,
    pub subsequent_total: usize,
}

impl RankingAccuracy {
    pub fn first(&self) -> f64 {
        if self.first_total == 0 {
            0.0
        } else {
            self.first_correct as f64 / self.first_total as f64
        }
    }

    pub fn subsequent(&self) -> f64 {
        if self.subsequent_total == 0 {
            0.0
        } else {
            self.subsequent_correct as f64 / self.subsequent_total as f64
        }
    }

    pub fn overall(&self) -> f64 {
        let total = self.first_total + self.subsequent_total;
        if total == 0 {
            0.0
        } else {
            (self.first_correct + self.subsequent_correct) as f64 / total as f64
        }
    }
}

/// Rank the gold string against `n - 1` distractors per case.
///
/// Distractors are drawn uniformly without replacement from the distinct
/// gold strings of the *other* cases, excluding duplicates of the true
/// string. The case passes only if the gold string scores strictly highest.
pub fn entity_ranking(
    scorer: &mut dyn MentionScorer,
    cases: &[RankingCase],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RankingAccuracy, EvaluateError> {
    assert!(n >= 2, "ranking needs at least two candidates");
    let mut acc = RankingAccuracy {
        first_correct: 0,
        first_total: 0,
        subsequent_correct: 0,
        subsequent_total: 0,
    };
    // Distinct pool across all cases; per-case we drop the gold string.
    let pool: BTreeSet<&str> = cases.iter().map(|c| c.gold.as_str()).collect();
    for case in cases {
        let candidates: Vec<&str> = pool
            .iter()
            .copied()
            .filter(|s| *s != case.gold)
            .collect();
        if candidates.len() < n - 1 {
            return Err(EvaluateError::TooFewDistractors {
                available: candidates.len(),
                needed: n - 1,
            });
        }
        // Partial Fisher-Yates: the first n-1 slots become the sample.
        let mut indices: Vec<usize> = (0..candidates.len()).collect();
        for i in 0..(n - 1) {
            let j = i + rng.gen_range(0..indices.len() - i);
            indices.swap(i, j);
        }
        let gold_score = scorer.score(&case.ctx, &case.gold);
        let mut beaten = true;
        for &idx in &indices[..n - 1] {
            let s = scorer.score(&case.ctx, candidates[idx]);
            if s >= gold_score {
                beaten = false;
                break;
            }
        }
        if case.is_first {
            acc.first_total += 1;
            if beaten {
                acc.first_correct += 1;
            }
        } else {
            acc.subsequent_total += 1;
            if beaten {
                acc.subsequent_correct += 1;
            }
        }
    }
    Ok(acc)
}
