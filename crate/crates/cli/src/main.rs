use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use storygen_cli::config::load_config;
use storygen_cli::{dispatch, Command, TrainStage};

#[derive(Parser)]
#[command(
    name = "storygen",
    about = "Coarse-to-fine story generation: plans, anonymized stories, reference filling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted-key config overrides, e.g. --set train.steps=500
    #[arg(long = "set", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tokenize the dataset and build vocabularies.
    Preprocess,
    /// Produce annotation records (heuristics or a validated import).
    Annotate {
        /// Force the built-in heuristic annotators.
        #[arg(long, conflicts_with = "import")]
        fallback: bool,
        /// Import and validate externally produced annotation records.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Build the deterministic intermediates for a scheme.
    Decompose {
        /// srl-plan | ner-anon | coref-anon | combined (default from config).
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Train one stage model.
    Train {
        /// plan | story | fill
        #[arg(long)]
        stage: String,
    },
    /// Generate stories for a prompt file.
    Generate {
        /// Prompts, one per line (default: the preprocessed prompts).
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        /// Trim emitted stories to this many words.
        #[arg(long)]
        trim_words: Option<usize>,
    },
    /// Compute the metric report over generated stories.
    Evaluate {
        /// Extra path for the text report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// decompose -> train (all stages) -> generate -> evaluate.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match &cli.command {
        Cmd::Preprocess => Command::Preprocess,
        Cmd::Annotate { fallback, import } => Command::Annotate {
            import: import.clone(),
            force_fallback: *fallback,
        },
        Cmd::Decompose { scheme } => Command::Decompose {
            scheme: scheme.clone(),
        },
        Cmd::Train { stage } => match stage.parse::<TrainStage>() {
            Ok(stage) => Command::Train { stage },
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        Cmd::Generate {
            prompt_file,
            trim_words,
        } => Command::Generate {
            prompt_file: prompt_file.clone(),
            trim_words: *trim_words,
        },
        Cmd::Evaluate { report } => Command::Evaluate {
            report: report.clone(),
        },
        Cmd::Pipeline => Command::Pipeline,
    };

    let cfg = match load_config(cli.config.as_deref(), &cli.set, cli.seed, cli.out.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match dispatch(command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
