//! The `spinflow` command-line tool.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or configuration
//! error, 3 any other runtime error.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod studies;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use spinflow::SpinMode;

use crate::commands::{ConvergeOptions, ConvergeOutcome, SimulateOptions};
use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Runtime(#[from] spinflow::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use spinflow::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(E::Config(_) | E::Input(_) | E::Bracket { .. }) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinflow", version, about = "Mean-field spin system experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Aggregated,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the limiting ODE and print the trajectory as CSV.
    Ode {
        #[arg(long)]
        config: PathBuf,
        /// Write trajectory.csv and a manifest here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one path of the jump process to a binary event log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// System size (default: the largest N in N_grid).
        #[arg(long = "n")]
        n: Option<u32>,
        #[arg(long, default_value_t = 0)]
        replica: u64,
        #[arg(long, value_enum, default_value_t = Mode::Aggregated)]
        mode: Mode,
        /// Also write events.csv.
        #[arg(long)]
        csv: bool,
    },
    /// Ensemble of sup distances between jump paths and the ODE.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Discard an interrupted run instead of resuming it.
        #[arg(long)]
        fresh: bool,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
    },
    /// Locate the bifurcation of a cyclic model along J_range.
    Bifurcate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the finite-N ensembles on both sides of the critical value.
        #[arg(long)]
        no_ensemble: bool,
    },
    /// Coupled jump and auxiliary processes; discrepancy statistics.
    Couple {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every coupled run (two event logs and a discrepancy CSV).
        #[arg(long)]
        store_runs: bool,
    },
    /// Re-check checksums and stored coupled runs of an output directory.
    Validate { dir: PathBuf },
}

/// Worker count from `THREADS`, or the machine's parallelism.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var("THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Config(format!("THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn output_dir(out: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    out.or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))
}

fn dispatch(command: Command, threads: usize) -> Result<(), CliError> {
    match command {
        Command::Ode { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            commands::ode(&config, out.as_deref(), threads)
        }
        Command::Simulate {
            config,
            out,
            n,
            replica,
            mode,
            csv,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, &config)?;
            let mode = match mode {
                Mode::Full => SpinMode::Full,
                Mode::Aggregated => SpinMode::Aggregated,
            };
            commands::simulate(&config, &dir, &SimulateOptions { n, replica, mode, csv }, threads)
        }
        Command::Converge {
            config,
            out,
            fresh,
            stop_after,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, &config)?;
            match commands::converge(&config, &dir, &ConvergeOptions { fresh, stop_after }, threads)? {
                ConvergeOutcome::Complete => {
                    eprintln!("wrote {}", dir.display());
                    Ok(())
                }
                ConvergeOutcome::Interrupted { completed } => {
                    eprintln!("stopped after {completed} replica jobs; rerun to resume");
                    Ok(())
                }
            }
        }
        Command::Bifurcate { config, out, no_ensemble } => {
            let config = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, &config)?;
            commands::bifurcate(&config, &dir, !no_ensemble, threads)
        }
        Command::Couple { config, out, store_runs } => {
            let config = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, &config)?;
            let store = store_runs || config.store_runs;
            if commands::couple(&config, &dir, store, threads)? {
                Ok(())
            } else {
                Err(CliError::Validation("the coupling inequality failed in at least one run".into()))
            }
        }
        Command::Validate { dir } => {
            let report = validate::validate(&dir)?;
            if report.ok() {
                eprintln!(
                    "ok: {} files, {} coupled runs",
                    report.files_checked, report.runs_checked
                );
                Ok(())
            } else {
                Err(CliError::Validation(report.problems.join("; ")))
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(cli.command, threads))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
