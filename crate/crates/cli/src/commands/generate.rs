//! `generate`: run the trained pipeline over a prompt file and emit one
//! story per line plus a provenance record per example.

use std::path::Path;

use storygen::corpus::{Prompt, Scheme, Story, Vocabulary};
use storygen::decompose::deanonymize;
use storygen::generate::{
    countable_word, fill_anonymized, generate_sequence, run_pipeline, FillRecord,
    GenerationConfig, Provenance,
};
use storygen::model::{DecodeSession, FillModel, PipelineBundle, Seq2Seq};
use storygen::seeds::substream;

use crate::artifacts::Artifacts;
use crate::config::RunConfig;
use crate::CliError;

use super::{read_manifest, CliScheme, Manifest};

fn gen_configs(cfg: &RunConfig, vocab: &Vocabulary, seed: u64) -> (GenerationConfig, GenerationConfig) {
    let g = &cfg.generation;
    let banned = vec![vocab.unk_id(), vocab.pad_id(), vocab.bos_id()];
    let story = GenerationConfig {
        temperature: g.temperature,
        top_k: g.top_k,
        min_words: g.min_words,
        max_words: g.max_words,
        slack_words: g.slack_words,
        copy_threshold: g.copy_threshold,
        seed,
        banned: banned.clone(),
    };
    let plan = GenerationConfig {
        min_words: 0,
        max_words: g.plan_max_words,
        slack_words: g.plan_max_words / 4 + 1,
        ..story.clone()
    };
    (plan, story)
}

/// Rebuild a model from its manifest config and checkpoint.
pub fn load_checkpointed(
    cfg: Option<&storygen::model::Seq2SeqConfig>,
    path: &Path,
) -> Result<Seq2Seq, CliError> {
    let cfg = cfg.ok_or_else(|| {
        CliError::Validation(format!(
            "manifest has no model for {} (train it first)",
            path.display()
        ))
    })?;
    super::require_files(&[path])?;
    Seq2Seq::load(cfg.clone(), path).map_err(|e| CliError::Validation(e.to_string()))
}

/// Rebuild the reference filler with its vocabularies and merge table.
pub fn load_fill(
    cfg: &RunConfig,
    manifest: &Manifest,
    artifacts: &Artifacts,
) -> Result<FillModel, CliError> {
    let story_vocab = super::load_vocab(&artifacts.vocab_story(), Scheme::Word)?;
    let fill_scheme = super::parse_fill_scheme(cfg)?;
    let fill_vocab = super::load_vocab(&artifacts.vocab_fill(), fill_scheme)?;
    let merges = if fill_scheme == Scheme::Bpe {
        Some(
            storygen::corpus::BpeMerges::load(&artifacts.bpe_merges())
                .map_err(|e| CliError::Validation(format!("cannot load merges: {e}")))?,
        )
    } else {
        None
    };
    let model = load_checkpointed(manifest.fill.as_ref(), &artifacts.fill_ckpt())?;
    let mut fill = FillModel::new(model, story_vocab, fill_vocab, merges);
    fill.window = manifest.window;
    Ok(fill)
}

/// Keep tokens until `max_words` countable words have passed.
fn trim_to_words(tokens: &[String], max_words: usize) -> Vec<String> {
    let mut words = 0;
    let mut out = Vec::new();
    for t in tokens {
        if countable_word(t) {
            if words == max_words {
                break;
            }
            words += 1;
        }
        out.push(t.clone());
    }
    out
}

pub fn run(
    cfg: &RunConfig,
    artifacts: &Artifacts,
    prompt_file: Option<&Path>,
    trim_words: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    let manifest = read_manifest(artifacts)?;
    let scheme = CliScheme::parse(&manifest.scheme)?;

    let prompt_path = prompt_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| artifacts.prompts_tok());
    super::require_files(&[&prompt_path, &artifacts.vocab_prompt(), &artifacts.vocab_story()])?;
    let prompt_text = std::fs::read_to_string(&prompt_path)
        .map_err(|e| CliError::Validation(format!("cannot read prompts: {e}")))?;
    let prompts: Vec<Prompt> = prompt_text.lines().map(Prompt::new).collect();

    let prompt_vocab = super::load_vocab(&artifacts.vocab_prompt(), Scheme::Word)?;
    let story_vocab = super::load_vocab(&artifacts.vocab_story(), Scheme::Word)?;
    let (plan_cfg, story_cfg) = gen_configs(cfg, &story_vocab, seed);

    let stage1_model = load_checkpointed(manifest.plan.as_ref(), &artifacts.plan_ckpt())?;

    let mut outputs: Vec<(Story, Provenance)> = Vec::with_capacity(prompts.len());
    match scheme {
        CliScheme::Combined => {
            let story_model =
                load_checkpointed(manifest.story.as_ref(), &artifacts.story_ckpt())?;
            let fill_model = load_fill(cfg, &manifest, artifacts)?;
            let anonymization = scheme.anonymization(cfg)?;
            let mut bundle = PipelineBundle {
                plan_model: stage1_model,
                story_model,
                fill_model,
                prompt_vocab,
                story_vocab,
                scheme: anonymization,
            };
            bundle
                .validate()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            for (i, prompt) in prompts.iter().enumerate() {
                let (story, provenance) =
                    run_pipeline(prompt, &mut bundle, &plan_cfg, &story_cfg, i as u64)
                        .map_err(|e| CliError::stage(&e.to_string(), ""))?;
                outputs.push((story, provenance));
            }
        }
        CliScheme::SrlPlan => {
            let story_model =
                load_checkpointed(manifest.story.as_ref(), &artifacts.story_ckpt())?;
            for (i, prompt) in prompts.iter().enumerate() {
                let src = prompt_vocab.encode(&prompt.tokens);
                let mut session = DecodeSession::new(&stage1_model, &src, &story_vocab);
                let mut rng = substream(seed, "pipeline-plan", i as u64);
                let plan = generate_sequence(&mut session, &story_vocab, &plan_cfg, &mut rng)
                    .map_err(|e| CliError::stage("plan", e))?;
                let src = story_vocab.encode(&plan.tokens);
                let mut session = DecodeSession::new(&story_model, &src, &story_vocab);
                let mut rng = substream(seed, "pipeline-story", i as u64);
                let out = generate_sequence(&mut session, &story_vocab, &story_cfg, &mut rng)
                    .map_err(|e| CliError::stage("story", e))?;
                let story = Story::from_tokens(out.tokens);
                let provenance = Provenance {
                    prompt: prompt.tokens.clone(),
                    plan: plan.tokens,
                    anonymized: story.tokens.clone(),
                    fills: Vec::<FillRecord>::new(),
                    story: story.tokens.clone(),
                };
                outputs.push((story, provenance));
            }
        }
        CliScheme::NerAnon | CliScheme::CorefAnon => {
            let fill_model = load_fill(cfg, &manifest, artifacts)?;
            let anonymization = scheme.anonymization(cfg)?;
            for (i, prompt) in prompts.iter().enumerate() {
                let src = prompt_vocab.encode(&prompt.tokens);
                let mut session = DecodeSession::new(&stage1_model, &src, &story_vocab);
                let mut rng = substream(seed, "pipeline-story", i as u64);
                let anon = generate_sequence(&mut session, &story_vocab, &story_cfg, &mut rng)
                    .map_err(|e| CliError::stage("story", e))?;
                let (fills, fill_records) = fill_anonymized(
                    &anon.tokens,
                    anonymization,
                    fill_model.window,
                    |id, tokens| {
                        fill_model
                            .ner_fill_predict(id, tokens)
                            .map_err(|e| storygen::generate::GenerateError::Model(e.to_string()))
                    },
                    |ctx| {
                        fill_model
                            .coref_fill_predict(ctx)
                            .map_err(|e| storygen::generate::GenerateError::Model(e.to_string()))
                    },
                )
                .map_err(|e| CliError::stage("fill", e))?;
                let story_tokens =
                    deanonymize(&anon.tokens, &fills).map_err(|e| CliError::stage("fill", e))?;
                let story = Story::from_tokens(story_tokens);
                let provenance = Provenance {
                    prompt: prompt.tokens.clone(),
                    plan: Vec::new(),
                    anonymized: anon.tokens,
                    fills: fill_records,
                    story: story.tokens.clone(),
                };
                outputs.push((story, provenance));
            }
        }
    }

    let trim = trim_words.unwrap_or(cfg.generation.trim_words);
    let mut story_lines = String::new();
    let mut provenance_lines = String::new();
    for (story, provenance) in &outputs {
        let tokens = if trim > 0 {
            trim_to_words(&story.tokens, trim)
        } else {
            story.tokens.clone()
        };
        story_lines.push_str(&tokens.join(" "));
        story_lines.push('\n');
        provenance_lines
            .push_str(&serde_json::to_string(provenance).expect("provenance serializes"));
        provenance_lines.push('\n');
    }
    std::fs::write(artifacts.stories_out(), story_lines)
        .map_err(|e| CliError::Validation(format!("cannot write stories: {e}")))?;
    std::fs::write(artifacts.provenance(), provenance_lines)
        .map_err(|e| CliError::Validation(format!("cannot write provenance: {e}")))?;
    Ok(())
}
