//! Command-line front end: `train`, `eval`, `ablate`, `rollout` and `inspect`.
//!
//! Exit status is 0 on success, 1 when a run fails after starting and 2 for
//! usage, configuration, grammar and checkpoint errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{RunManifest, RunStatus, CHECKPOINT_DIR, MANIFEST_FILE, METRICS_CSV, METRICS_FILE, STATE_DIR};
pub use config::{resolve_output, RunConfig, OUTPUT_ROOT_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("grammar: {0}")]
    Grammar(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{0}")]
    Runtime(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Grammar(_) | CliError::Checkpoint { .. } => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bicot", version, about = "Plan-then-paint GRPO on a toy grid image generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy; resumes when the output directory holds saved state.
    Train(TrainArgs),
    /// Score a checkpoint on a benchmark suite.
    Eval(EvalArgs),
    /// Compare which response segments are optimized, or which reward experts are used.
    Ablate(AblateArgs),
    /// Sample a group of responses for one prompt.
    Rollout(RolloutArgs),
    /// Describe a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Return after this many steps, leaving resumable state behind.
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Suite file; the bundled suite when omitted.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Images per prompt.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 12345)]
    pub seed: u64,
    /// Run config supplying grammar, generation and reward settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for `eval.json` and `eval.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated modes: none, semantic_only, token_only, both.
    #[arg(long, value_delimiter = ',', default_value = "none,semantic_only,token_only,both")]
    pub modes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    /// Comma-separated reward masks such as `H,D,HD,HDVO`; switches to the reward-expert sweep.
    #[arg(long, value_delimiter = ',')]
    pub masks: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub prompt: String,
    #[arg(long, default_value_t = 4)]
    pub g: usize,
    /// Greedy decoding for both plan and image.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write one JSON record per response to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Rollout(a) => commands::rollout(&a),
        Command::Inspect(a) => commands::inspect(&a),
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
