//! `train`: fit one stage model on the decomposed artifacts and write its
//! checkpoint plus the shared manifest.

use storygen::corpus::{Scheme, Vocabulary};
use storygen::decompose::{read_table_file, AnonymizedStory};
use storygen::model::{
    coref_fill_training_examples, ner_fill_training_examples, pointer_supervision,
    train_model, Seq2Seq, TrainConfig, TrainExample,
};
use storygen::nn::AdamConfig;
use storygen::seeds::substream;

use crate::artifacts::{read_token_file, Artifacts};
use crate::config::RunConfig;
use crate::{CliError, TrainStage};

use super::{read_manifest_or_default, seq2seq_config, write_manifest, CliScheme};

/// Assemble id-space training pairs; verb positions and pointer supervision
/// are derived from the target whenever the model's special heads ask for
/// them.
fn make_examples(
    sources: &[Vec<String>],
    targets: &[Vec<String>],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    want_verbs: bool,
    want_pointer: bool,
) -> Vec<TrainExample> {
    sources
        .iter()
        .zip(targets)
        .map(|(src, tgt)| {
            let src_ids = src_vocab.encode(src);
            let mut tgt_ids = tgt_vocab.encode(tgt);
            tgt_ids.push(tgt_vocab.eos_id());
            let verb_positions = if want_verbs {
                let mut input = vec![tgt_vocab.bos_id()];
                input.extend_from_slice(&tgt_ids[..tgt_ids.len() - 1]);
                storygen::model::verb_positions_in_input(&input, tgt_vocab.frame_id())
            } else {
                Vec::new()
            };
            let pointer = want_pointer.then(|| pointer_supervision(&tgt_ids, tgt_vocab));
            TrainExample {
                src: src_ids,
                tgt: tgt_ids,
                verb_positions,
                pointer,
            }
        })
        .collect()
}

/// Plain (source -> target) pairs for teacher-forced NLL evaluation.
pub fn eval_examples(
    sources: &[Vec<String>],
    targets: &[Vec<String>],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Vec<TrainExample> {
    make_examples(sources, targets, src_vocab, tgt_vocab, false, false)
}

/// Reconstruct anonymized stories from the token artifact plus its tables.
pub fn load_anonymized(
    artifacts: &Artifacts,
    scheme: CliScheme,
) -> Result<Vec<AnonymizedStory>, CliError> {
    let anon_path = match scheme {
        CliScheme::Combined => artifacts.stage2(),
        CliScheme::NerAnon | CliScheme::CorefAnon => artifacts.stage1(),
        CliScheme::SrlPlan => {
            return Err(CliError::Validation(
                "scheme srl-plan has no placeholders, so there is nothing to fill".into(),
            ))
        }
    };
    super::require_files(&[&anon_path, &artifacts.tables()])?;
    let token_lines = read_token_file(&anon_path)?;
    let tables = read_table_file(&artifacts.tables())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if tables.len() != token_lines.len() {
        return Err(CliError::Validation(format!(
            "{} table records for {} anonymized stories",
            tables.len(),
            token_lines.len()
        )));
    }
    Ok(token_lines
        .into_iter()
        .zip(tables)
        .map(|(tokens, record)| AnonymizedStory {
            tokens,
            table: record.table,
            scheme: record.scheme,
            overflowed: false,
        })
        .collect())
}

pub fn run(
    cfg: &RunConfig,
    artifacts: &Artifacts,
    stage: TrainStage,
    seed: u64,
) -> Result<(), CliError> {
    let scheme = super::scheme_of(cfg, None)?;
    let train_cfg = TrainConfig {
        steps: cfg.train.steps,
        adam: AdamConfig {
            lr: cfg.train.lr,
            ..AdamConfig::default()
        },
        seed,
        pointer_loss_weight: cfg.train.pointer_loss_weight,
    };
    let mut manifest = read_manifest_or_default(artifacts);
    manifest.scheme = scheme.name().to_string();
    manifest.seed = seed;
    manifest.fill_scheme = cfg.preprocess.fill_scheme.clone();
    manifest.window = 10;
    manifest.vocab_files = vec![
        "vocab.prompt.txt".into(),
        "vocab.story.txt".into(),
        "vocab.fill.txt".into(),
    ];

    match stage {
        TrainStage::Plan => {
            super::require_files(&[
                &artifacts.prompts_tok(),
                &artifacts.stage1(),
                &artifacts.vocab_prompt(),
                &artifacts.vocab_story(),
            ])?;
            let prompt_vocab = super::load_vocab(&artifacts.vocab_prompt(), Scheme::Word)?;
            let story_vocab = super::load_vocab(&artifacts.vocab_story(), Scheme::Word)?;
            let sources = read_token_file(&artifacts.prompts_tok())?;
            let targets = read_token_file(&artifacts.stage1())?;
            let model_cfg =
                seq2seq_config(&cfg.model.plan, prompt_vocab.len(), story_vocab.len());
            let examples = make_examples(
                &sources,
                &targets,
                &prompt_vocab,
                &story_vocab,
                model_cfg.verb_head.is_some(),
                model_cfg.pointer_head.is_some(),
            );
            let mut rng = substream(seed, "init-plan", 0);
            let mut model =
                Seq2Seq::new(model_cfg.clone(), &mut rng).map_err(|e| CliError::stage("train", e))?;
            train_model(&mut model, &examples, &train_cfg)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            model
                .save(&artifacts.plan_ckpt())
                .map_err(|e| CliError::stage("train", e))?;
            manifest.plan = Some(model_cfg);
        }
        TrainStage::Story => {
            super::require_files(&[
                &artifacts.stage1(),
                &artifacts.stage2(),
                &artifacts.vocab_story(),
            ])?;
            let story_vocab = super::load_vocab(&artifacts.vocab_story(), Scheme::Word)?;
            let sources = read_token_file(&artifacts.stage1())?;
            let targets = read_token_file(&artifacts.stage2())?;
            let model_cfg =
                seq2seq_config(&cfg.model.story, story_vocab.len(), story_vocab.len());
            let examples = make_examples(
                &sources,
                &targets,
                &story_vocab,
                &story_vocab,
                model_cfg.verb_head.is_some(),
                model_cfg.pointer_head.is_some(),
            );
            let mut rng = substream(seed, "init-story", 0);
            let mut model =
                Seq2Seq::new(model_cfg.clone(), &mut rng).map_err(|e| CliError::stage("train", e))?;
            train_model(&mut model, &examples, &train_cfg)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            model
                .save(&artifacts.story_ckpt())
                .map_err(|e| CliError::stage("train", e))?;
            manifest.story = Some(model_cfg);
        }
        TrainStage::Fill => {
            super::require_files(&[&artifacts.vocab_story(), &artifacts.vocab_fill()])?;
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
            let anonymized = load_anonymized(artifacts, scheme)?;
            let mut examples = Vec::new();
            for anon in &anonymized {
                let batch = match anon.scheme {
                    storygen::decompose::AnonScheme::Ner => {
                        ner_fill_training_examples(anon, &story_vocab, &fill_vocab, merges.as_ref())
                    }
                    storygen::decompose::AnonScheme::Coref => coref_fill_training_examples(
                        anon,
                        &story_vocab,
                        &fill_vocab,
                        merges.as_ref(),
                        manifest.window,
                    ),
                };
                examples.extend(batch);
            }
            let model_cfg = seq2seq_config(&cfg.model.fill, story_vocab.len(), fill_vocab.len());
            let mut rng = substream(seed, "init-fill", 0);
            let mut model =
                Seq2Seq::new(model_cfg.clone(), &mut rng).map_err(|e| CliError::stage("train", e))?;
            train_model(&mut model, &examples, &train_cfg)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            model
                .save(&artifacts.fill_ckpt())
                .map_err(|e| CliError::stage("train", e))?;
            manifest.fill = Some(model_cfg);
        }
    }
    write_manifest(artifacts, &manifest)
}
