//! `dphase`: estimate spectral constants, scan `λ`, and run diagnostics
//! for double-phase eigenvalue problems described by a TOML config.
//!
//! Exit codes: 0 success, 1 configuration/validation/I/O error,
//! 2 unresolved result (non-converged estimate or failed diagnostics).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, EXIT_ERROR};
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dphase", version, about = "Double-phase variable-exponent eigenvalue toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Override the configured output directory. It must already exist.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Estimate lambda1 = inf J/I and lambda0 = inf J1/I1.
    Solve,
    /// Classify every lambda of the configured grid.
    Scan,
    /// Run the verification checks.
    Validate,
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let path = cli.config.ok_or_else(|| Failure("--config is required".into()))?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(&path, &Overrides { seed: cli.seed, out: cli.out })?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Scan => commands::scan(&cfg),
        Command::Validate => commands::validate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
