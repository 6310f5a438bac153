//! `aelt`: hypothesis checks, two-solution solves and scans from a TOML
//! config. Exit status: 0 success, 2 config error, 3 solver failure,
//! 4 hypothesis failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::ScanTarget;
use crate::config::ProblemConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "aelt", version, about = "Two critical points of anisotropic periodic Euler-Lagrange problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of grid nodes.
    #[arg(long)]
    grid_n: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample every structural hypothesis and the ball-based comparison.
    Check(Common),
    /// Mountain-pass point and sublevel minimizer.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Run even if required checks fail; the report is marked
        /// "hypotheses-unverified".
        #[arg(long)]
        force: bool,
    },
    /// Tables behind the region and h-function plots, or the boundary scan.
    Scan {
        #[arg(value_enum)]
        target: ScanTarget,
        #[command(flatten)]
        common: Common,
    },
}

fn load(c: &Common) -> Result<ProblemConfig, CliError> {
    ProblemConfig::load(&c.config)?.with_overrides(c.seed, c.grid_n, c.out.clone())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check(c) => commands::cmd_check(&load(&c)?),
        Command::Solve { common, force } => commands::cmd_solve(&load(&common)?, force),
        Command::Scan { target, common } => commands::cmd_scan(&load(&common)?, target),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aelt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
