//! `gspcanet`: synthesize data, train, predict, evaluate and run the
//! selection-bias experiment.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::{keys_help, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gspcanet",
    version,
    about = "Graph-regularized sparse PCA filter networks for tumor tile detection"
)]
struct Cli {
    /// Worker threads (0 uses every core). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a deterministic two-class synthetic dataset with masks and manifests.
    Synth(SynthArgs),
    /// Learn filters and the tile classifier; write a model file.
    Train(TrainArgs),
    /// Score every tile of every image in a manifest.
    Predict(PredictArgs),
    /// Compute metrics and curves from a tile score CSV.
    Evaluate(EvaluateArgs),
    /// Repeat train/test on reseeded splits and fit a Gaussian to the accuracies.
    ExperimentBias(BiasArgs),
}

/// Configuration sources shared by commands that take run settings.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines (`#` comments).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for pair in &self.set {
            cfg.apply_pair(pair)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Images per class.
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// 1 (gray) or 3 (RGB).
    #[arg(long, default_value_t = 1)]
    channels: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_std: f64,
    /// Fraction of each class written to test.csv.
    #[arg(long, default_value_t = 0.5)]
    test_fraction: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training manifest (path,label,mask CSV).
    #[arg(long)]
    manifest: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Same as --set seed=N.
    #[arg(long)]
    seed: Option<u64>,
    /// Choose lambda1 from {0, 1e-3, 1e-2} on a validation split.
    #[arg(long)]
    tune: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Score CSV to write (image,row,col,score,label).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Tile score CSV from `predict`.
    #[arg(long)]
    scores: PathBuf,
    /// Manifest with masks; overrides the label column of the score CSV.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for metrics.csv, roc.csv and froc.csv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Method name printed in the table row.
    #[arg(long, default_value = "GS-PCANet")]
    method: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct BiasArgs {
    /// Full dataset manifest; each run draws its own split.
    #[arg(long)]
    manifest: PathBuf,
    /// Number of runs with seeds derived from the master seed.
    #[arg(long)]
    runs: Option<usize>,
    /// Explicit comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Same as --set seed=N.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::ExperimentBias(a) => commands::experiment_bias(&a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let help = keys_help();
    let mut command = Cli::command();
    for name in ["train", "evaluate", "experiment-bias"] {
        command = command.mut_subcommand(name, |c| c.after_help(help.clone()));
    }
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
