//! Automatic evaluation: stage NLLs, verb diversity, similarity to the
//! training set, entity-ranking accuracy, entity-name diversity, and
//! coreference-cluster statistics.

mod lcs;
mod metrics;
mod ranking;

pub use lcs::{lcs_len, lcs_len_ids, lcs_stats, LcsStats};
pub use metrics::{
    coref_cluster_stats, corpus_lcs, entity_name_diversity, lemmatize, verb_diversity,
    CorefStats, VerbDiversity,
};
pub use ranking::{entity_ranking, ranking_cases, MentionScorer, RankingAccuracy, RankingCase};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{nll, ModelError, Seq2Seq, TrainExample};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("only {available} distinct distractors available, need {needed}")]
    TooFewDistractors { available: usize, needed: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reference values measured on full-scale training runs over the complete
/// dataset. They are documentation targets, not reproducible at desk scale,
/// and appear in reports for orientation only.
pub mod reference {
    /// Stage NLLs (nats/token) of the action-plan decomposition at full
    /// scale: (intermediate, story given intermediate).
    pub const FULL_SCALE_SRL_PLAN_STAGE_NLL: (f64, f64) = (2.72, 3.95);
    /// Mean unique verbs per human-written story at full scale.
    pub const FULL_SCALE_HUMAN_UNIQUE_VERBS: f64 = 34.0;
    /// Percent of human verb tokens outside the top-5 most frequent verbs.
    pub const FULL_SCALE_HUMAN_DIVERSE_VERB_PCT: f64 = 76.5;
    /// Character-level filler, first mentions, 10 candidates: accuracy %.
    pub const FULL_SCALE_CHAR_FILLER_RANK10_FIRST: f64 = 64.2;
    /// Mean unique entity names per human-written story.
    pub const FULL_SCALE_HUMAN_UNIQUE_ENTITIES: f64 = 2.99;
    /// Human stories: mean non-singleton chains and unique names per chain.
    pub const FULL_SCALE_HUMAN_COREF_CHAINS: f64 = 4.77;
    pub const FULL_SCALE_HUMAN_NAMES_PER_CHAIN: f64 = 3.41;
}

/// Mean per-token NLL of both stages of a decomposition under teacher
/// forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageNll {
    pub stage1: f64,
    pub stage2: f64,
}

/// Teacher-forced stage NLLs for (prompt -> z*) and (z* -> x) pairs.
pub fn stage_nll_report(
    stage1_model: &Seq2Seq,
    stage1_pairs: &[TrainExample],
    stage2_model: &Seq2Seq,
    stage2_pairs: &[TrainExample],
) -> Result<StageNll, EvaluateError> {
    Ok(StageNll {
        stage1: nll(stage1_model, stage1_pairs)?,
        stage2: nll(stage2_model, stage2_pairs)?,
    })
}

/// Accuracy table over candidate-set sizes, split by mention kind.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankingTable {
    pub candidate_counts: Vec<usize>,
    pub first: Vec<f64>,
    pub subsequent: Vec<f64>,
}

/// The full evaluation record; optional sections are skipped when their
/// inputs (models, training set) are unavailable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: String,
    /// Where verb/entity annotations came from: "imported" or "heuristic".
    pub annotation_source: String,
    pub stories: usize,
    pub stage_nll: Option<StageNll>,
    pub unique_verbs_per_story: f64,
    pub diverse_verb_pct: f64,
    pub lcs_max_mean: Option<f64>,
    pub lcs_avg_mean: Option<f64>,
    pub ranking: Option<RankingTable>,
    pub unique_entities_per_story: f64,
    pub coref_chains_per_story: f64,
    pub unique_names_per_chain: f64,
}

impl MetricsReport {
    /// Aligned plain-text rendering, one metric per row.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut row = |label: &str, value: String| {
            out.push_str(&format!("{label:<44} {value}\n"));
        };
        row("scheme", self.scheme.clone());
        row("annotation source", self.annotation_source.clone());
        row("stories evaluated", self.stories.to_string());
        if let Some(nll) = &self.stage_nll {
            row("stage 1 NLL (nats/token)", format!("{:.4}", nll.stage1));
            row("stage 2 NLL (nats/token)", format!("{:.4}", nll.stage2));
        }
        row(
            "unique verbs per story",
            format!("{:.4}", self.unique_verbs_per_story),
        );
        row("% diverse verbs", format!("{:.4}", self.diverse_verb_pct));
        if let (Some(max), Some(avg)) = (self.lcs_max_mean, self.lcs_avg_mean) {
            row("max LCS vs training (tokens)", format!("{max:.4}"));
            row("avg LCS vs training (tokens)", format!("{avg:.4}"));
        }
        if let Some(table) = &self.ranking {
            for (i, n) in table.candidate_counts.iter().enumerate() {
                row(
                    &format!("ranking accuracy, first mentions, {n} cands"),
                    format!("{:.4}", table.first[i]),
                );
                row(
                    &format!("ranking accuracy, subsequent mentions, {n} cands"),
                    format!("{:.4}", table.subsequent[i]),
                );
            }
        }
        row(
            "unique entities per story",
            format!("{:.4}", self.unique_entities_per_story),
        );
        row(
            "coref chains per story",
            format!("{:.4}", self.coref_chains_per_story),
        );
        row(
            "unique names per chain",
            format!("{:.4}", self.unique_names_per_chain),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_renders_every_populated_row() {
        let report = MetricsReport {
            scheme: "coref-anon".into(),
            annotation_source: "heuristic".into(),
            stories: 3,
            stage_nll: Some(StageNll {
                stage1: 1.25,
                stage2: 2.5,
            }),
            unique_verbs_per_story: 4.0,
            diverse_verb_pct: 50.0,
            lcs_max_mean: Some(7.0),
            lcs_avg_mean: Some(3.5),
            ranking: Some(RankingTable {
                candidate_counts: vec![10],
                first: vec![1.0],
                subsequent: vec![0.5],
            }),
            unique_entities_per_story: 2.0,
            coref_chains_per_story: 1.0,
            unique_names_per_chain: 2.0,
        };
        let text = report.render_text();
        assert!(text.contains("stage 1 NLL"));
        assert!(text.contains("ranking accuracy, first mentions, 10 cands"));
        assert!(text.contains("% diverse verbs"));
        // Round-trips as a structured record.
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.stories, 3);
    }
}
