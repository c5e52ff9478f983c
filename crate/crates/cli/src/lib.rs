//! Command-line front end for the spin-glass landscape experiments and the
//! AnnealSGD trainer.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use commands::{gradcheck, landscape, perturb, regimes, train};
pub use error::{exit, CliError, Result};
pub use manifest::{RunManifest, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "annealscape", version, about = "Spin-glass landscape census and AnnealSGD training")]
pub struct Cli {
    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate B, the regime and the expected critical-point count over a ν grid.
    Regimes(regimes::RegimesArgs),
    /// Run the gradient-descent minima census across regimes.
    Landscape(landscape::LandscapeArgs),
    /// Measure how far minima move under a small external field.
    PerturbCheck(perturb::PerturbArgs),
    /// Train a fully connected network, optionally with AnnealSGD.
    Train(train::TrainArgs),
    /// Compare analytic derivatives with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Regimes(a) => regimes::run(a),
        Command::Landscape(a) => landscape::run(a),
        Command::PerturbCheck(a) => perturb::run(a),
        Command::Train(a) => train::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
