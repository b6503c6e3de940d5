//! Run configuration: one TOML file plus dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Full-scale vocabulary sizes used by the original experiments; desk-scale
/// defaults below are far smaller.
pub const FULL_SCALE_PROMPT_VOCAB: usize = 19_025;
pub const FULL_SCALE_STORY_VOCAB: usize = 104_960;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory; may come from `--seed` instead of the file.
    pub seed: Option<u64>,
    /// Decomposition scheme: srl-plan | ner-anon | coref-anon | combined.
    pub scheme: String,
    pub paths: Paths,
    pub preprocess: PreprocessCfg,
    pub decompose: DecomposeCfg,
    pub model: ModelCfgs,
    pub train: TrainCfg,
    pub generation: GenerationCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            scheme: "combined".into(),
            paths: Paths::default(),
            preprocess: PreprocessCfg::default(),
            decompose: DecomposeCfg::default(),
            model: ModelCfgs::default(),
            train: TrainCfg::default(),
            generation: GenerationCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Prompt file, one per line.
    pub source: PathBuf,
    /// Story file, line-aligned with `source`.
    pub target: PathBuf,
    /// Optional annotation records to import instead of the heuristics.
    pub annotations: Option<PathBuf>,
    /// Artifact directory.
    pub out: PathBuf,
    /// Optional story file for `evaluate` (defaults to generated stories).
    pub eval_stories: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessCfg {
    pub max_story_words: usize,
    pub prompt_vocab_size: usize,
    pub story_vocab_size: usize,
    /// Sub-word scheme of the reference filler: word | bpe | character.
    pub fill_scheme: String,
    pub fill_vocab_size: usize,
    pub bpe_merges: usize,
}

impl Default for PreprocessCfg {
    fn default() -> Self {
        PreprocessCfg {
            max_story_words: 1000,
            prompt_vocab_size: 2000,
            story_vocab_size: 4000,
            fill_scheme: "character".into(),
            fill_vocab_size: 512,
            bpe_merges: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeCfg {
    /// Entity anonymization used by the combined scheme: ner | coref.
    pub anonymization: String,
    pub max_placeholders: usize,
}

impl Default for DecomposeCfg {
    fn default() -> Self {
        DecomposeCfg {
            anonymization: "coref".into(),
            max_placeholders: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelCfg {
    pub model_dim: usize,
    pub heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub kernel_width: usize,
    pub max_positions: usize,
    pub verb_head: Option<usize>,
    pub pointer_head: Option<usize>,
}

impl Default for ModelCfg {
    fn default() -> Self {
        ModelCfg {
            model_dim: 32,
            heads: 4,
            enc_layers: 1,
            dec_layers: 2,
            kernel_width: 3,
            max_positions: 1024,
            verb_head: None,
            pointer_head: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelCfgs {
    pub plan: ModelCfg,
    pub story: ModelCfg,
    pub fill: ModelCfg,
}

impl Default for ModelCfgs {
    fn default() -> Self {
        ModelCfgs {
            plan: ModelCfg {
                verb_head: Some(0),
                ..Default::default()
            },
            story: ModelCfg {
                pointer_head: Some(0),
                ..Default::default()
            },
            fill: ModelCfg {
                model_dim: 32,
                heads: 2,
                enc_layers: 1,
                dec_layers: 1,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCfg {
    pub steps: usize,
    pub lr: f64,
    pub pointer_loss_weight: f64,
}

impl Default for TrainCfg {
    fn default() -> Self {
        TrainCfg {
            steps: 400,
            lr: 2e-3,
            pointer_loss_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationCfg {
    pub temperature: f64,
    pub top_k: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub slack_words: usize,
    pub copy_threshold: f64,
    /// Word budget for the intermediate stage.
    pub plan_max_words: usize,
    /// Trim emitted stories to this many words; 0 disables.
    pub trim_words: usize,
}

impl Default for GenerationCfg {
    fn default() -> Self {
        GenerationCfg {
            temperature: 0.8,
            top_k: 10,
            min_words: 150,
            max_words: 250,
            slack_words: 100,
            copy_threshold: 0.5,
            plan_max_words: 80,
            trim_words: 0,
        }
    }
}

/// Parse the config file (if any), apply `--set key.path=value` overrides,
/// then fold in `--seed` and `--out` flags.
pub fn load_config(
    config_path: Option<&Path>,
    overrides: &[String],
    seed_flag: Option<u64>,
    out_flag: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", path.display()))
            })?;
            text.parse().map_err(|e| {
                CliError::Validation(format!("malformed config {}: {e}", path.display()))
            })?
        }
        None => toml::Table::new(),
    };
    for entry in overrides {
        apply_override(&mut table, entry)?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    if let Some(seed) = seed_flag {
        cfg.seed = Some(seed);
    }
    if let Some(out) = out_flag {
        cfg.paths.out = out.to_path_buf();
    }
    Ok(cfg)
}

/// Set `a.b.c = value` in a TOML table, parsing the value as TOML when
/// possible and falling back to a string.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), CliError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override {entry:?} is not key=value")))?;
    // Parse the value as TOML (numbers, bools, quoted strings, arrays);
    // bare words fall back to plain strings.
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Validation(format!("override {entry:?}: {part} is not a table"))
            })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Stable digest of the effective configuration, for the run log.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
