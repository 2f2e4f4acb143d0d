//! `sylvadi` command-line front end.

mod commands;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use failure::{Classify, CmdResult};
use sylvadi::shifts::{DEFAULT_DIRECT_RITZ, DEFAULT_INVERSE_RITZ, DEFAULT_PAIRS};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SYLVADI_THREADS";

#[derive(Parser)]
#[command(
    name = "sylvadi",
    version,
    about = "Inexact low-rank ADI for sparse Sylvester equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every strategy of a manifest and write reports.
    Solve {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate convection-diffusion matrices and a random right-hand side.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute heuristic shift parameters from Ritz values.
    Shifts {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        m: Option<PathBuf>,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        c: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PAIRS)]
        pairs: usize,
        #[arg(long, default_value_t = DEFAULT_DIRECT_RITZ)]
        direct: usize,
        #[arg(long, default_value_t = DEFAULT_INVERSE_RITZ)]
        inverse: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute residual diagnostics for saved runs.
    Verify {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_VAR} must be a positive integer, got {value:?}"))
        .invalid()?;
    if threads == 0 {
        return Err(anyhow::anyhow!("{THREADS_VAR} must be positive")).invalid();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .runtime()
}

fn dispatch(command: Command) -> CmdResult {
    configure_threads()?;
    match command {
        Command::Solve { manifest } => {
            let summary = commands::solve::run_manifest(&manifest)?;
            commands::solve::print_table(&summary);
            commands::solve::check_converged(&summary)
        }
        Command::Gen { spec, out } => commands::gen::generate(&spec, &out),
        Command::Shifts {
            a,
            m,
            b,
            c,
            pairs,
            direct,
            inverse,
            out,
        } => commands::shifts::compute(&commands::shifts::ShiftRequest {
            a,
            m,
            b,
            c,
            pairs,
            direct,
            inverse,
            out,
        }),
        Command::Verify { dir } => commands::verify::verify(&dir).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
