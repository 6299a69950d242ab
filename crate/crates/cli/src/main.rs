//! `adt`: certify and simulate linear impulsive systems under averaged
//! dwell-time schedules.
//!
//! Exit codes: 0 success / certified, 1 honest negative (not certified,
//! residual above tolerance), 2 invalid input.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "adt", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Overrides both the schedule generator seed and run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress progress notes on standard error.
    #[arg(long, global = true)]
    quiet: bool,

    #[arg(long, global = true)]
    t_end: Option<f64>,

    /// Number of impulses for mr-check.
    #[arg(long, global = true)]
    k: Option<usize>,

    #[arg(long, global = true)]
    theta: Option<f64>,

    #[arg(long, global = true)]
    chi_max: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Evaluate the stability certificate and write a JSON report.
    Certify,
    /// Simulate the impulsive ODE or sine-mode PDE and write a CSV trajectory.
    Simulate,
    /// Print omega and its per-order term table.
    Omega,
    /// Check the comparison-system identity on a schedule.
    MrCheck,
    /// Generate an impulse schedule document.
    GenTimes,
    /// Tabulate nested commutator norms.
    Commutators,
}

fn run(cli: &Cli) -> Result<commands::Outcome> {
    let path = cli
        .config
        .as_ref()
        .context("--config <path> is required")?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        t_end: cli.t_end,
        k: cli.k,
        theta: cli.theta,
        chi_max: cli.chi_max,
    });
    match cli.command {
        Command::Certify => commands::certify(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Omega => commands::omega(&cfg),
        Command::MrCheck => commands::mr_check(&cfg),
        Command::GenTimes => commands::gen_times(&cfg),
        Command::Commutators => commands::commutators(&cfg),
    }
}

fn emit(cli: &Cli, body: &str) -> Result<()> {
    match &cli.output {
        Some(path) => std::fs::write(path, body)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match run(&cli) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&cli, &outcome.body) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    if !cli.quiet {
        for note in &outcome.notes {
            eprintln!("{note}");
        }
    }
    ExitCode::from(outcome.code)
}
