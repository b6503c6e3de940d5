//! `evaluate`: run every automatic metric that its inputs allow and emit the
//! report as aligned text and a structured record.

use std::path::Path;

use storygen::annotate::{annotate_story, default_verb_lexicon, Gazetteer};
use storygen::corpus::{Scheme, Story};
use storygen::evaluate::{
    coref_cluster_stats, corpus_lcs, entity_name_diversity, entity_ranking, ranking_cases,
    stage_nll_report, verb_diversity, EvaluateError, MetricsReport, RankingTable,
};
use storygen::seeds::substream;

use crate::artifacts::{read_token_file, Artifacts};
use crate::config::RunConfig;
use crate::CliError;

use super::generate::{load_checkpointed, load_fill};
use super::train::{eval_examples, load_anonymized};
use super::{read_manifest, CliScheme};

pub fn run(
    cfg: &RunConfig,
    artifacts: &Artifacts,
    report_path: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let stories_path = cfg
        .paths
        .eval_stories
        .clone()
        .unwrap_or_else(|| artifacts.stories_out());
    super::require_files(&[&stories_path])?;
    let generated_tokens = read_token_file(&stories_path)?;
    let generated: Vec<Story> = generated_tokens
        .iter()
        .cloned()
        .map(Story::from_tokens)
        .collect();
    if generated.is_empty() {
        return Err(CliError::Validation(format!(
            "no stories to evaluate in {}",
            stories_path.display()
        )));
    }

    // Generated text carries no external annotations; the heuristics stand
    // in for the taggers, and the report records that.
    let lexicon = default_verb_lexicon();
    let gazetteer = Gazetteer::new();
    let annotated: Vec<_> = generated
        .iter()
        .map(|s| annotate_story(s, &lexicon, &gazetteer))
        .collect();

    let verbs = verb_diversity(&annotated, &lexicon)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let entities =
        entity_name_diversity(&annotated).map_err(|e| CliError::Validation(e.to_string()))?;
    let coref = coref_cluster_stats(&annotated).map_err(|e| CliError::Validation(e.to_string()))?;

    let (lcs_max_mean, lcs_avg_mean) = if artifacts.stories_tok().exists() {
        let training = read_token_file(&artifacts.stories_tok())?;
        let (max_mean, avg_mean) = corpus_lcs(&generated_tokens, &training)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        (Some(max_mean), Some(avg_mean))
    } else {
        (None, None)
    };

    // Model-dependent sections run only when the trained artifacts exist.
    let manifest = read_manifest(artifacts).ok();
    let mut stage_nll = None;
    let mut ranking = None;
    let mut scheme_name = cfg.scheme.clone();
    if let Some(manifest) = &manifest {
        scheme_name = manifest.scheme.clone();
        let scheme = CliScheme::parse(&manifest.scheme)?;
        if artifacts.plan_ckpt().exists()
            && artifacts.story_ckpt().exists()
            && artifacts.stage1().exists()
            && artifacts.stage2().exists()
        {
            let prompt_vocab = super::load_vocab(&artifacts.vocab_prompt(), Scheme::Word)?;
            let story_vocab = super::load_vocab(&artifacts.vocab_story(), Scheme::Word)?;
            let plan_model = load_checkpointed(manifest.plan.as_ref(), &artifacts.plan_ckpt())?;
            let story_model = load_checkpointed(manifest.story.as_ref(), &artifacts.story_ckpt())?;
            let prompts = read_token_file(&artifacts.prompts_tok())?;
            let stage1 = read_token_file(&artifacts.stage1())?;
            let stage2 = read_token_file(&artifacts.stage2())?;
            let stage1_pairs = eval_examples(&prompts, &stage1, &prompt_vocab, &story_vocab);
            let stage2_pairs = eval_examples(&stage1, &stage2, &story_vocab, &story_vocab);
            stage_nll = Some(
                stage_nll_report(&plan_model, &stage1_pairs, &story_model, &stage2_pairs)
                    .map_err(|e| CliError::stage("evaluate", e))?,
            );
        }
        if scheme.has_placeholders()
            && artifacts.fill_ckpt().exists()
            && artifacts.tables().exists()
        {
            let mut fill_model = load_fill(cfg, manifest, artifacts)?;
            let anonymized = load_anonymized(artifacts, scheme)?;
            let cases = ranking_cases(&anonymized, manifest.window);
            let mut counts = Vec::new();
            let mut first = Vec::new();
            let mut subsequent = Vec::new();
            for n in [10usize, 50, 100] {
                let mut rng = substream(seed, "ranking", n as u64);
                match entity_ranking(&mut fill_model, &cases, n, &mut rng) {
                    Ok(acc) => {
                        counts.push(n);
                        first.push(acc.first());
                        subsequent.push(acc.subsequent());
                    }
                    // Small corpora cannot field 50 or 100 distinct
                    // candidates; skip those columns.
                    Err(EvaluateError::TooFewDistractors { .. }) => {}
                    Err(e) => return Err(CliError::stage("evaluate", e)),
                }
            }
            if !counts.is_empty() {
                ranking = Some(RankingTable {
                    candidate_counts: counts,
                    first,
                    subsequent,
                });
            }
        }
    }

    let report = MetricsReport {
        scheme: scheme_name,
        annotation_source: "heuristic".into(),
        stories: generated.len(),
        stage_nll,
        unique_verbs_per_story: verbs.unique_verbs_per_story,
        diverse_verb_pct: verbs.diverse_verb_pct,
        lcs_max_mean,
        lcs_avg_mean,
        ranking,
        unique_entities_per_story: entities,
        coref_chains_per_story: coref.chains_per_story,
        unique_names_per_chain: coref.unique_names_per_chain,
    };

    let text = report.render_text();
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(artifacts.report_txt(), &text)
        .map_err(|e| CliError::Validation(format!("cannot write report: {e}")))?;
    std::fs::write(artifacts.report_json(), json + "\n")
        .map_err(|e| CliError::Validation(format!("cannot write report: {e}")))?;
    if let Some(path) = report_path {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Validation(format!("cannot write report: {e}")))?;
    }
    Ok(())
}
