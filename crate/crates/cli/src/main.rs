//! `gcnl` — train and evaluate small gesture-recognition CNNs from the
//! command line. Every command is deterministic given its config and seeds;
//! failures exit nonzero with a single machine-parseable `error: ...` line.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gcnl",
    about = "Desk-scale CNN laboratory: synthetic gesture data, focal-loss training, AUC/Recall evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file path plus the override flags shared by every command.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// Run configuration file (key = value lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the epoch budget
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the model choice (plain | residual | dense-connect | custom)
    #[arg(long)]
    model: Option<String>,
    /// Override the loss (focal | cross-entropy)
    #[arg(long)]
    loss: Option<String>,
    /// Override the focal gamma
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gesture dataset directory
    Synth(ConfigArgs),
    /// Train a model; writes checkpoint.gcnl and metrics.csv to the output directory
    Train(ConfigArgs),
    /// Evaluate a checkpoint on the configured dataset split
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint file (default: <out_dir>/checkpoint.gcnl)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Classify one PGM/PPM image with a trained checkpoint
    Predict {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint file
        #[arg(long)]
        checkpoint: PathBuf,
        /// Image to classify
        image: PathBuf,
    },
    /// Verify backpropagation of a zoo architecture (tiny scale) against
    /// central finite differences
    Gradcheck(ConfigArgs),
    /// Train plain/residual/dense-connect (plus optional custom) under one
    /// seed and budget; print an AUC/Recall table
    Compare(ConfigArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Train(args) => commands::train(args),
        Command::Eval { config, checkpoint } => commands::eval(config, checkpoint.as_deref()),
        Command::Predict {
            config,
            checkpoint,
            image,
        } => commands::predict(config, checkpoint, image),
        Command::Gradcheck(args) => commands::gradcheck(args),
        Command::Compare(args) => commands::compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line, machine-parseable.
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
