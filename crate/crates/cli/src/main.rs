//! `asmap` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure classes, each with a fixed exit code.
#[derive(Debug)]
pub enum CliError {
    /// A run completed partially or a numerical check failed (exit 1).
    Run(String),
    /// Invalid configuration or arguments (exit 2).
    Config(String),
    /// Filesystem or data-file problem (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Run(m) | CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

/// Library errors raised while loading data count as I/O, everything else
/// as a run failure.
impl From<asmap::Error> for CliError {
    fn from(e: asmap::Error) -> Self {
        match e.root() {
            asmap::Error::Io { .. } | asmap::Error::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "asmap", version, about = "EEG emotion classification with differential-entropy asymmetric maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the [synth] section.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = TrialFormat::Rawbin)]
        format: TrialFormat,
    },
    /// Compute windowed DE and normalized AsMaps for every trial of a manifest.
    Extract {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on extracted features.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Directory for the history and resolved config; defaults to the
        /// checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on the held-out split of extracted features.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model_in: PathBuf,
        /// Directory for report.json; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a method × band × window grid from the [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference check of the backward passes on a toy model.
    Gradcheck {
        #[arg(long, value_enum, default_value_t = GradLayers::Full)]
        layers: GradLayers,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TrialFormat {
    Rawbin,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum GradLayers {
    /// Conv, pool, dense and softmax layers.
    Full,
    /// Dense layers without activations.
    Dense,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, force, seed, format } => commands::synth(&config, &out, force, seed, format),
        Command::Extract { config, manifest, out } => commands::extract(&config, manifest.as_deref(), &out),
        Command::Train { config, features, model_out, out, seed } => {
            commands::train(&config, &features, &model_out, out.as_deref(), seed)
        }
        Command::Eval { config, features, model_in, out, seed } => {
            commands::eval(&config, &features, &model_in, out.as_deref(), seed)
        }
        Command::Sweep { config, out, seed } => commands::sweep(&config, &out, seed),
        Command::Gradcheck { layers, eps, seed } => commands::gradcheck(layers, eps, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
