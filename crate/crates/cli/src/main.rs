//! `nbbm`: run the particle-system, PDE and coupling experiments from the
//! command line.
//!
//! Every subcommand accepts `--config <file.json>` (a flat JSON object whose
//! keys are the flag names with `_` for `-`), `--out <dir>` and `--seed <s>`.
//! Flags override the file; missing keys take their defaults. The output
//! directory receives `resolved-config.json`, the command's CSV/JSON files
//! and `manifest.json` with their SHA-256 checksums. A one-line JSON summary
//! goes to stdout.
//!
//! Exit codes: 0 on success, 2 on invalid arguments or configuration, 1 on a
//! numerical failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::*;

#[derive(Debug, Parser)]
#[command(name = "nbbm", version, about = "N-BBM with selection, its free-boundary PDE, and couplings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one particle system and log its trajectory.
    Simulate(SimulateArgs),
    /// Long-run snapshots of one system after burn-in.
    Stationary(StationaryArgs),
    /// Replica estimates of the asymptotic velocity for several N.
    Velocity(VelocityArgs),
    /// W₁ distance of stationary snapshots to the minimal wave, for several N.
    Selection(SelectionArgs),
    /// Solve the free-boundary PDE.
    Pde(PdeArgs),
    /// Travelling-wave tables.
    Wave {
        #[command(subcommand)]
        action: WaveAction,
    },
    /// Coupled pairs of particle systems and their distance.
    Couple(CoupleArgs),
    /// Brownian motion killed at a moving boundary.
    Killedbm(KilledArgs),
    /// PDE runs from exponential tails (exploratory).
    Conjecture(ConjectureArgs),
    /// Reduced-scale property checks of every module.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
enum WaveAction {
    /// Write x, density and tail of π_c.
    Dump(WaveDumpArgs),
}

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(anyhow::Error),
}

impl From<nbbm_core::Error> for Failure {
    fn from(e: nbbm_core::Error) -> Self {
        use nbbm_core::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::Precondition(_)
            | E::WrongCentring(_)
            | E::SubcriticalSpeed(_)
            | E::LengthMismatch(..)
            | E::InvalidTail(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

fn dispatch(cmd: &Command) -> (&'static str, Result<serde_json::Map<String, Value>, Failure>) {
    match cmd {
        Command::Simulate(a) => ("simulate", simulate(a)),
        Command::Stationary(a) => ("stationary", stationary(a)),
        Command::Velocity(a) => ("velocity", velocity(a)),
        Command::Selection(a) => ("selection", selection(a)),
        Command::Pde(a) => ("pde", pde(a)),
        Command::Wave {
            action: WaveAction::Dump(a),
        } => ("wave", wave_dump(a)),
        Command::Couple(a) => ("couple", couple(a)),
        Command::Killedbm(a) => ("killedbm", killedbm(a)),
        Command::Conjecture(a) => ("conjecture", conjecture(a)),
        Command::Verify(a) => ("verify", verify(a)),
    }
}

fn main() {
    let cli = Cli::parse();
    let (name, result) = dispatch(&cli.command);
    match result {
        Ok(mut s) => {
            s.insert("command".into(), Value::String(name.into()));
            s.insert("status".into(), Value::String("ok".into()));
            println!("{}", Value::Object(s));
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try 'nbbm {name} --help'.");
            std::process::exit(2);
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
