mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

/// Mesh neural networks: train, evolve, sweep, predict and report.
#[derive(Parser)]
#[command(name = "mnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run description; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for fitness evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train the backprop baseline; writes mlp.bin and mlp_loss.csv.
    TrainMlp,
    /// Run the genetic algorithm; writes best.mnn and trace.csv.
    Evolve,
    /// Run the hyperparameter grid; writes sweep.csv.
    Sweep,
    /// Classify a dataset with a saved network; writes predictions.jsonl.
    Predict,
    /// Aggregate predictions or day pages per source; writes report.csv.
    Report,
    /// Write the configured synthetic dataset as blobs.jsonl.
    SynthBlobs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.common.seed,
        out: cli.common.out,
        threads: cli.common.threads,
    };
    let cfg = RunConfig::load(cli.common.config.as_deref(), &overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::TrainMlp => commands::train_mlp_cmd(&cfg),
        Command::Evolve => commands::evolve_cmd(&cfg),
        Command::Sweep => commands::sweep_cmd(&cfg),
        Command::Predict => commands::predict_cmd(&cfg),
        Command::Report => commands::report_cmd(&cfg),
        Command::SynthBlobs => commands::synth_blobs_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = CliError::Config(e.to_string().lines().next().unwrap_or("").to_string());
            eprintln!("{}", err.to_line());
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.code() as u8)
        }
    }
}
