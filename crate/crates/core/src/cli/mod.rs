//! Command-line front end.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{DistSpec, RunConfig};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "renewal", version, about = "Left-tail asymptotics of renewal measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config file (flat key=value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output CSV path; defaults to run.out or stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides mc.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides run.workers.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve for (κ, ρ).
    Tilt,
    /// Write a renewal table.
    Oracle,
    /// Monte Carlo estimates of the left tail.
    Simulate,
    /// Predicted left tail for the detected regime.
    Predict,
    /// Oracle against prediction.
    Compare,
    /// The small-jump integral.
    Srtc,
    /// Calibrate the free parameter of a family.
    Calibrate,
}

/// Loads the config and applies the flag overrides.
pub fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<String> {
    match command {
        Command::Tilt => commands::tilt(cfg),
        Command::Oracle => commands::oracle(cfg),
        Command::Simulate => commands::simulate(cfg),
        Command::Predict => commands::predict(cfg),
        Command::Compare => commands::compare(cfg),
        Command::Srtc => commands::srtc(cfg),
        Command::Calibrate => commands::calibrate(cfg),
    }
}

fn run_parsed(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let csv = execute(cli.command, &cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_parsed(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
