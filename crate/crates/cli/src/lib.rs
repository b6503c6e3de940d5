//! Operator surface for the story-generation pipeline.
//!
//! Commands read and write declared artifacts under one output directory;
//! every run logs its config hash and seed, and all randomness flows from
//! the single mandatory seed.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;

use artifacts::Artifacts;
use config::{config_hash, RunConfig};

/// Command failures map onto process exit codes: validation errors exit 2,
/// stage failures exit 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub fn stage(stage: &str, message: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

/// Which model a `train` invocation fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStage {
    Plan,
    Story,
    Fill,
}

impl std::str::FromStr for TrainStage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plan" => Ok(TrainStage::Plan),
            "story" => Ok(TrainStage::Story),
            "fill" => Ok(TrainStage::Fill),
            other => Err(format!("unknown train stage: {other}")),
        }
    }
}

/// The operator commands.
#[derive(Debug, Clone)]
pub enum Command {
    Preprocess,
    Annotate {
        import: Option<PathBuf>,
        /// Use the heuristic annotators even when the config names an
        /// annotation file.
        force_fallback: bool,
    },
    Decompose {
        scheme: Option<String>,
    },
    Train {
        stage: TrainStage,
    },
    Generate {
        prompt_file: Option<PathBuf>,
        trim_words: Option<usize>,
    },
    Evaluate {
        report: Option<PathBuf>,
    },
    Pipeline,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Preprocess => "preprocess",
            Command::Annotate { .. } => "annotate",
            Command::Decompose { .. } => "decompose",
            Command::Train { .. } => "train",
            Command::Generate { .. } => "generate",
            Command::Evaluate { .. } => "evaluate",
            Command::Pipeline => "pipeline",
        }
    }
}

fn log_run(artifacts: &Artifacts, command: &str, cfg: &RunConfig) {
    // Timestamps are confined to this log; artifacts stay byte-stable.
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let line = format!(
        "ts={now} command={command} config={} seed={}\n",
        config_hash(cfg),
        cfg.seed.unwrap_or(0)
    );
    if let Ok(mut file) = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(artifacts.run_log())
    {
        let _ = file.write_all(line.as_bytes());
    }
}

/// Validate the config, log the invocation, and run the command.
pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Validation("a seed is mandatory (--seed or config)".into()))?;
    let artifacts = Artifacts::new(&cfg.paths.out);
    artifacts.ensure_dir()?;
    log_run(&artifacts, command.name(), cfg);

    match command {
        Command::Preprocess => commands::preprocess::run(cfg, &artifacts),
        Command::Annotate {
            import,
            force_fallback,
        } => commands::annotate::run(cfg, &artifacts, import.as_deref(), force_fallback),
        Command::Decompose { scheme } => {
            commands::decompose::run(cfg, &artifacts, scheme.as_deref())
        }
        Command::Train { stage } => commands::train::run(cfg, &artifacts, stage, seed),
        Command::Generate {
            prompt_file,
            trim_words,
        } => commands::generate::run(cfg, &artifacts, prompt_file.as_deref(), trim_words, seed),
        Command::Evaluate { report } => {
            commands::evaluate::run(cfg, &artifacts, report.as_deref(), seed)
        }
        Command::Pipeline => {
            commands::decompose::run(cfg, &artifacts, None)?;
            commands::train::run(cfg, &artifacts, TrainStage::Plan, seed)?;
            commands::train::run(cfg, &artifacts, TrainStage::Story, seed)?;
            if commands::scheme_of(cfg, None)?.has_placeholders() {
                commands::train::run(cfg, &artifacts, TrainStage::Fill, seed)?;
            }
            commands::generate::run(cfg, &artifacts, None, None, seed)?;
            commands::evaluate::run(cfg, &artifacts, None, seed)
        }
    }
}
