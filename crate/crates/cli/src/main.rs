//! `ehdec` command line: solve the internal and external layers, simulate a
//! solved policy, and sweep internal rewards over harvesting rates.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 solver non-convergence (outputs are still written).

mod commands;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ehdec::internal::BackupKind;

#[derive(Parser, Debug)]
#[command(name = "ehdec", version, about = "Decentralized access policies for energy harvesting networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Solve the internal layer from each initial state; writes txprob.csv, levels.csv, bounds.csv.
    SolveInternal(#[command(flatten)] Args),
    /// Relative value iteration over SYNC states; writes via_trace.csv and G_vs_pB.csv.
    SolveExternal(#[command(flatten)] Args),
    /// Solve, then simulate the policy; writes trace.csv and summary.json.
    Simulate(#[command(flatten)] Args),
    /// Internal reward per policy kind over the harvesting grid; writes internal_sweep.csv.
    Sweep(#[command(flatten)] Args),
}

impl Command {
    pub fn args(&self) -> &Args {
        match self {
            Command::SolveInternal(a) | Command::SolveExternal(a) | Command::Simulate(a) | Command::Sweep(a) => a,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveInternal(_) => "solve-internal",
            Command::SolveExternal(_) => "solve-external",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(clap::Args, Debug, Clone, PartialEq, Eq)]
pub struct Args {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Backup::Wcsp)]
    pub backup: Backup,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backup {
    Exhaustive,
    Wcsp,
    Parametric,
}

impl From<Backup> for BackupKind {
    fn from(b: Backup) -> Self {
        match b {
            Backup::Exhaustive => BackupKind::Exhaustive,
            Backup::Wcsp => BackupKind::Wcsp,
            Backup::Parametric => BackupKind::Parametric,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NotConverged(String),
    Io(std::io::Error),
    Solver(ehdec::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io(_) | CliError::Solver(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ehdec::Error> for CliError {
    fn from(e: ehdec::Error) -> Self {
        use ehdec::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::Parse(_)
            | E::OrthogonalUnsupported(_)
            | E::SearchTooLarge { .. }
            | E::InfeasibleAction { .. } => CliError::Config(e.to_string()),
            E::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ehdec {}: {e}", cli.command.name());
            ExitCode::from(e.code())
        }
    }
}
