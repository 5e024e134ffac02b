//! `orbit-krein`: command-line experiments on symmetric periodic orbits.

// `!(x <= tol)` is the NaN-rejecting form of `x > tol`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use orbit_krein::Error;

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) => 1,
            Error::NoSignChange { .. } | Error::EventNotFound { .. } => 3,
            Error::ContinuationStalled { .. } => 4,
            Error::EvenWinding(_) | Error::BranchJump(_) => 5,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "orbit-krein",
    version,
    about = "Shooting, reduced monodromy and B-signs of symmetric periodic orbits"
)]
pub struct Cli {
    /// TOML file with default values for the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a 2x2 matrix and print its real Krein sign.
    Classify(commands::ClassifyArgs),
    /// Find one symmetric or doubly symmetric periodic orbit.
    Shoot(commands::ShootArgs),
    /// Continue a doubly symmetric family in energy.
    Family(commands::FamilyArgs),
    /// Monodromy report for a stored orbit.
    Monodromy(commands::MonodromyArgs),
    /// Euler characteristic of a list of reports.
    Euler(commands::EulerArgs),
    /// Levi-Civita lift of a stored orbit.
    LcLift(commands::LcLiftArgs),
    /// Run the invariant suite.
    Selfcheck(commands::SelfcheckArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
