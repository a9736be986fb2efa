//! `cascade-forge`: construct, verify, sweep and export from JSON configs and manifests.

mod commands;
mod config;
mod failure;
mod fit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::ExportKind;
use failure::Failure;

#[derive(Parser)]
#[command(name = "cascade-forge", version, about = "Finite-stage cascade constructions with zero initial data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged construction and write a manifest, per-stage reports and a summary.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a manifest: residual exactness, integral equation, ODE, cutoffs.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Measure increment norms over a grid of floors or splits and fit a log-log slope.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-ready CSV from a manifest.
    Export {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        kind: ExportKind,
        #[arg(long)]
        out: PathBuf,
    },
}

const THREADS_VAR: &str = "CASCADE_FORGE_THREADS";

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::invalid(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::invalid(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Construct { config, out } => commands::construct(&config, &out),
        Command::Verify { manifest } => commands::verify(&manifest),
        Command::Sweep { config, out } => commands::sweep(&config, &out),
        Command::Export { manifest, kind, out } => commands::export(&manifest, kind, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { failure::EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
