//! Command-line front end: `adiflow run <config> [--output PATH] [--jobs N]
//! [--verbose]`. Exit codes: 0 on success, 1 on a numerical failure or any
//! failed check row, 2 on a usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiflow_cli::{Config, CliError};

#[derive(Parser)]
#[command(name = "adiflow", version, about = "Batch runner for lattice adiabatic-response experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration file.
    Run {
        /// Path to the run configuration.
        config: PathBuf,
        /// Record file; overrides [output].csv from the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; defaults to ADIFLOW_JOBS or the machine's
        /// available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// Report job starts and finishes on stderr.
        #[arg(long, short)]
        verbose: bool,
    },
}

fn resolve_jobs(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::Usage("--jobs: must be at least 1".into()));
        }
        return Ok(n);
    }
    if let Ok(text) = std::env::var("ADIFLOW_JOBS") {
        let n: usize = text.trim().parse().map_err(|_| {
            CliError::Usage(format!("ADIFLOW_JOBS: expected a positive integer, got \"{text}\""))
        })?;
        if n == 0 {
            return Err(CliError::Usage("ADIFLOW_JOBS: must be at least 1".into()));
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_command(
    config: PathBuf,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    verbose: bool,
) -> Result<(), CliError> {
    let cfg = Config::load(&config)?;
    let workers = resolve_jobs(jobs)?;
    let out_path = output.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
    let stats = adiflow_cli::run(&cfg, out_path.as_deref(), workers, verbose)?;
    let target = out_path
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "stdout".into());
    eprintln!(
        "adiflow: wrote {} rows to {target} ({} checks, {} failed)",
        stats.rows, stats.checks, stats.failures
    );
    if stats.failures > 0 {
        return Err(CliError::Numerical(format!(
            "{} of {} check rows failed; see the records for details",
            stats.failures, stats.checks
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output, jobs, verbose } => {
            run_command(config, output, jobs, verbose)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Numerical(msg)) => {
            eprintln!("adiflow: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("adiflow: {msg}");
            ExitCode::from(2)
        }
    }
}
