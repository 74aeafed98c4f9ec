//! `twodevp`: solve 2D eigenvalue problems, min-max Rayleigh quotient
//! problems and distances to instability from the command line.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when a solver stops
//! without converging.

mod bench;
mod commands;
mod output;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::bench::BenchCommand;
use crate::commands::{DtiArgs, OracleCommand, RqMinmaxArgs, SolveArgs};
use crate::output::Sink;

#[derive(Debug, Parser)]
#[command(name = "twodevp", version, about)]
struct Cli {
    /// Directory for CSV and JSON outputs; defaults to the current directory.
    #[arg(long, global = true, env = "TWODEVP_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Master seed, recorded in every output.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Add wall-clock columns to bench outputs.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run 2DRQI on a Hermitian pair from an initial (mu0, lambda0).
    Solve(SolveArgs),
    /// Maximize the smaller of two Rayleigh quotients.
    Rqminmax(RqMinmaxArgs),
    /// Distance to instability of a stable matrix.
    Dti(DtiArgs),
    /// Brute-force baselines.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Reproduction benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

pub struct Ctx {
    pub seed: u64,
    pub timings: bool,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    pub fn sink(&self) -> Result<Sink> {
        Sink::new(self.out_dir.as_deref())
    }
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = Ctx {
        seed: cli.seed,
        timings: cli.timings,
        out_dir: cli.out_dir,
    };
    match &cli.command {
        Command::Solve(a) => commands::solve(a, &ctx),
        Command::Rqminmax(a) => commands::rqminmax(a, &ctx),
        Command::Dti(a) => commands::dti(a, &ctx),
        Command::Oracle(c) => commands::oracle(c, &ctx),
        Command::Bench(c) => bench::bench(c, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
