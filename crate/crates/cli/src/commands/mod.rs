//! Command implementations and their shared plumbing.

pub mod annotate;
pub mod decompose;
pub mod evaluate;
pub mod generate;
pub mod preprocess;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use storygen::corpus::{Scheme, SpecialTokens, Vocabulary};
use storygen::model::Seq2SeqConfig;

use crate::artifacts::Artifacts;
use crate::config::{ModelCfg, RunConfig};
use crate::CliError;

/// Decomposition pipelines the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliScheme {
    /// prompt -> plan -> story.
    SrlPlan,
    /// prompt -> anonymized story -> fills.
    NerAnon,
    /// prompt -> anonymized story -> fills (coreference clusters).
    CorefAnon,
    /// prompt -> plan -> anonymized story -> fills.
    Combined,
}

impl CliScheme {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "srl-plan" => Ok(CliScheme::SrlPlan),
            "ner-anon" => Ok(CliScheme::NerAnon),
            "coref-anon" => Ok(CliScheme::CorefAnon),
            "combined" => Ok(CliScheme::Combined),
            other => Err(CliError::Validation(format!(
                "unknown scheme {other:?} (expected srl-plan, ner-anon, coref-anon, combined)"
            ))),
        }
    }

    pub fn has_placeholders(&self) -> bool {
        !matches!(self, CliScheme::SrlPlan)
    }

    /// Anonymization used for placeholder tables under this scheme.
    pub fn anonymization(&self, cfg: &RunConfig) -> Result<storygen::decompose::AnonScheme, CliError> {
        match self {
            CliScheme::NerAnon => Ok(storygen::decompose::AnonScheme::Ner),
            CliScheme::CorefAnon => Ok(storygen::decompose::AnonScheme::Coref),
            CliScheme::Combined | CliScheme::SrlPlan => cfg
                .decompose
                .anonymization
                .parse()
                .map_err(CliError::Validation),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliScheme::SrlPlan => "srl-plan",
            CliScheme::NerAnon => "ner-anon",
            CliScheme::CorefAnon => "coref-anon",
            CliScheme::Combined => "combined",
        }
    }
}

/// Scheme from the command-line override or the config.
pub fn scheme_of(cfg: &RunConfig, flag: Option<&str>) -> Result<CliScheme, CliError> {
    CliScheme::parse(flag.unwrap_or(&cfg.scheme))
}

pub fn parse_fill_scheme(cfg: &RunConfig) -> Result<Scheme, CliError> {
    cfg.preprocess
        .fill_scheme
        .parse()
        .map_err(|e: String| CliError::Validation(e))
}

/// Records how the trained artifacts fit together; written by `train`,
/// read by `generate` and `evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub scheme: String,
    pub seed: u64,
    pub fill_scheme: String,
    pub window: usize,
    pub vocab_files: Vec<String>,
    pub plan: Option<Seq2SeqConfig>,
    pub story: Option<Seq2SeqConfig>,
    pub fill: Option<Seq2SeqConfig>,
}

pub fn read_manifest(artifacts: &Artifacts) -> Result<Manifest, CliError> {
    let path = artifacts.manifest();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("missing manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("malformed manifest: {e}")))
}

pub fn read_manifest_or_default(artifacts: &Artifacts) -> Manifest {
    read_manifest(artifacts).unwrap_or_default()
}

pub fn write_manifest(artifacts: &Artifacts, manifest: &Manifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(artifacts.manifest(), text + "\n")
        .map_err(|e| CliError::Validation(format!("cannot write manifest: {e}")))
}

pub fn load_vocab(path: &Path, scheme: Scheme) -> Result<Vocabulary, CliError> {
    Vocabulary::load(path, scheme, SpecialTokens::default())
        .map_err(|e| CliError::Validation(format!("cannot load vocabulary: {e}")))
}

/// Seq2seq config for a stage given its vocabulary sizes.
pub fn seq2seq_config(model: &ModelCfg, src_vocab: usize, tgt_vocab: usize) -> Seq2SeqConfig {
    Seq2SeqConfig {
        src_vocab,
        tgt_vocab,
        model_dim: model.model_dim,
        heads: model.heads,
        enc_layers: model.enc_layers,
        dec_layers: model.dec_layers,
        kernel_width: model.kernel_width,
        max_positions: model.max_positions,
        verb_head: model.verb_head,
        pointer_head: model.pointer_head,
    }
}

/// Paths that must exist before a command starts.
pub fn require_files(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Validation(format!(
                "required input {} does not exist (run the earlier commands first)",
                p.display()
            )));
        }
    }
    Ok(())
}
