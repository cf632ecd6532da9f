//! `mlas`: run multi-level adaptive sampling experiments from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Rejected before any simulator call (exit 2).
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(#[from] mlas_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "mlas", version, about = "Cost-aware adaptive sampling for multi-level Gaussian-process emulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and write run logs plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run independent seeds in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Sweep the level-2 cost ratio and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the two-level reference bundle: replication, batch comparison,
    /// single- vs multi-level comparison and the cost-ratio sweep.
    ReplicatePaper {
        #[arg(long, default_value = "replicate-paper")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, parallel } => commands::run(&config, out, parallel),
        Command::Sweep { config } => commands::sweep(&config),
        Command::ReplicatePaper { out, seeds } => commands::replicate_paper(&out, seeds),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlas: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
