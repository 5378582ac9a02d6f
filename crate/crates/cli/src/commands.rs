//! Subcommands that write their results to an output directory.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinflow::eventlog::{write_event_csv, EventLogWriter};
use spinflow::jump::{grid_counts, round_to_grid, simulate_density_profile_into, simulate_spin_system};
use spinflow::rng::replica_seed;
use spinflow::{RngStream, SpinMode};

use crate::config::ExperimentConfig;
use crate::manifest::{unix_now, RunManifest};
use crate::studies::{
    check_feasible, ensemble_rows, interpolation_error_bound, jobs, rounding_errors, run_bifurcation_study,
    run_coupling_study, summarize_ensemble, trajectory, EnsembleRow, BIFURCATION_CSV_HEADER, DISCREPANCY_CSV_HEADER,
    ENSEMBLE_CSV_HEADER,
};
use crate::CliError;

pub const ENSEMBLE_CSV: &str = "ensemble.csv";
pub const BIFURCATION_CSV: &str = "bifurcation.csv";
pub const DISCREPANCY_CSV: &str = "discrepancy.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";

const PARTIAL_SUFFIX: &str = ".partial";
const RESUME_FILE: &str = "resume.json";

/// Creates `dir` and checks that it accepts files.
pub fn prepare_output_dir(dir: &Path) -> Result<(), CliError> {
    let unwritable = |e: std::io::Error| CliError::Config(format!("output directory {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(unwritable)?;
    let probe = dir.join(".write-probe");
    File::create(&probe).map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("outputs serialize") + "\n"))
}

pub fn trajectory_csv(config: &ExperimentConfig) -> Result<String, CliError> {
    let spec = config.spec();
    let traj = trajectory(config, &spec, &config.x0)?;
    let mut out = String::from("t");
    for i in 1..=spec.dim() {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push_str(&t.to_string());
        for v in x.iter() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn ode(config: &ExperimentConfig, out: Option<&Path>, threads: usize) -> Result<(), CliError> {
    let csv = trajectory_csv(config)?;
    match out {
        None => {
            std::io::stdout()
                .write_all(csv.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
        Some(dir) => {
            let started = unix_now();
            prepare_output_dir(dir)?;
            write_text(&dir.join(TRAJECTORY_CSV), &csv)?;
            RunManifest::new("ode", config, started, threads).finish(dir, &[TRAJECTORY_CSV.into()])?;
        }
    }
    Ok(())
}

pub struct SimulateOptions {
    pub n: Option<u32>,
    pub replica: u64,
    pub mode: SpinMode,
    pub csv: bool,
}

/// Writes one path as `events.bin` (and `events.csv`).
pub fn simulate(config: &ExperimentConfig, dir: &Path, opts: &SimulateOptions, threads: usize) -> Result<(), CliError> {
    let started = unix_now();
    let spec = config.spec();
    let n = opts.n.unwrap_or_else(|| config.largest_n());
    if n == 0 {
        return Err(CliError::Config("N must be positive".into()));
    }
    prepare_output_dir(dir)?;
    let (x0, rounding) = round_to_grid(&config.x0, n);
    let seed = replica_seed(config.master_seed, n.into(), opts.replica);
    let stream = RngStream::new(seed, 0);
    let bin = dir.join("events.bin");
    let mut files = vec!["events.bin".to_string()];
    let events = match opts.mode {
        SpinMode::Aggregated if !opts.csv => {
            // long paths are streamed straight to disk
            let initial = grid_counts(&x0, n)?;
            let file = File::create(&bin).map_err(|e| CliError::io(&bin, e))?;
            let mut writer = EventLogWriter::new(file, n, config.horizon, stream.seed(), &initial)?;
            let (_, count) = simulate_density_profile_into(&spec, &x0, n, config.horizon, stream, &mut writer)?;
            writer.finish()?;
            count
        }
        mode => {
            check_feasible(&spec, n, config.horizon)?;
            let path = simulate_spin_system(&spec, &x0, n, config.horizon, stream, mode)?;
            spinflow::eventlog::save_event_log(&path, &bin)?;
            if opts.csv {
                let csv = dir.join("events.csv");
                write_event_csv(&path, File::create(&csv).map_err(|e| CliError::io(&csv, e))?)?;
                files.push("events.csv".into());
            }
            path.events.len() as u64
        }
    };
    let mut manifest = RunManifest::new("simulate", config, started, threads);
    manifest.note("N", n);
    manifest.note("replica", opts.replica);
    manifest.note("seed", seed);
    manifest.note("events", events);
    manifest.note("x0_rounding", rounding);
    manifest.note("mode", if opts.mode == SpinMode::Full { "full" } else { "aggregated" });
    manifest.finish(dir, &files)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ResumeState {
    config_hash: String,
}

/// Reads the rows already completed by an interrupted run, truncating any
/// incomplete trailing line. Returns `None` when nothing can be reused.
fn completed_rows(partial: &Path, expected: &[(u32, u64)]) -> Result<Option<Vec<EnsembleRow>>, CliError> {
    let Ok(file) = File::open(partial) else {
        return Ok(None);
    };
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| CliError::io(partial, e))?;
    if line.trim_end() != ENSEMBLE_CSV_HEADER || !line.ends_with('\n') {
        return Ok(None);
    }
    let mut good_bytes = line.len() as u64;
    let mut rows = Vec::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| CliError::io(partial, e))?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        let Some(row) = EnsembleRow::parse(line.trim_end()) else {
            break;
        };
        if expected.get(rows.len()) != Some(&(row.n, row.replica)) {
            break;
        }
        rows.push(row);
        good_bytes += read as u64;
    }
    let f = OpenOptions::new().write(true).open(partial).map_err(|e| CliError::io(partial, e))?;
    f.set_len(good_bytes).map_err(|e| CliError::io(partial, e))?;
    Ok(Some(rows))
}

pub struct ConvergeOptions {
    /// Ignore an interrupted run in the output directory.
    pub fresh: bool,
    /// Stop after this many completed replica jobs, leaving the run
    /// resumable (used to exercise resumption).
    pub stop_after: Option<usize>,
}

pub enum ConvergeOutcome {
    Complete,
    Interrupted { completed: usize },
}

/// Replica jobs are computed in parallel chunks and appended in order, so an
/// interrupted run leaves a valid prefix of `ensemble.csv`.
pub fn converge(
    config: &ExperimentConfig,
    dir: &Path,
    opts: &ConvergeOptions,
    threads: usize,
) -> Result<ConvergeOutcome, CliError> {
    let started = unix_now();
    let spec = config.spec();
    for &n in &config.n_grid {
        check_feasible(&spec, n, config.horizon)?;
    }
    prepare_output_dir(dir)?;
    let all_jobs = jobs(config);
    let partial: PathBuf = dir.join(format!("{ENSEMBLE_CSV}{PARTIAL_SUFFIX}"));
    let resume_path = dir.join(RESUME_FILE);
    let hash = config.hash();

    let resumable = !opts.fresh
        && fs::read_to_string(&resume_path)
            .ok()
            .and_then(|t| serde_json::from_str::<ResumeState>(&t).ok())
            .is_some_and(|s| s.config_hash == hash);
    let mut rows = if resumable { completed_rows(&partial, &all_jobs)? } else { None }.unwrap_or_default();
    let resumed = rows.len();
    if rows.is_empty() {
        write_text(&partial, &format!("{ENSEMBLE_CSV_HEADER}\n"))?;
        write_json(&resume_path, &ResumeState { config_hash: hash })?;
    }

    let traj = trajectory(config, &spec, &config.x0)?;
    let mut out = OpenOptions::new().append(true).open(&partial).map_err(|e| CliError::io(&partial, e))?;
    let chunk = (4 * threads).max(8);
    let limit = opts.stop_after.map_or(all_jobs.len(), |s| s.min(all_jobs.len()));
    while rows.len() < limit {
        let end = (rows.len() + chunk).min(limit);
        let batch = ensemble_rows(config, &spec, &traj, &all_jobs[rows.len()..end])?;
        let text: String = batch.iter().map(|r| r.to_csv() + "\n").collect();
        out.write_all(text.as_bytes()).map_err(|e| CliError::io(&partial, e))?;
        out.sync_data().map_err(|e| CliError::io(&partial, e))?;
        rows.extend(batch);
    }
    drop(out);
    if rows.len() < all_jobs.len() {
        return Ok(ConvergeOutcome::Interrupted { completed: rows.len() });
    }

    let final_csv = dir.join(ENSEMBLE_CSV);
    fs::rename(&partial, &final_csv).map_err(|e| CliError::io(&final_csv, e))?;
    let _ = fs::remove_file(&resume_path);
    write_json(&dir.join(SUMMARY_JSON), &summarize_ensemble(config, &rows))?;
    let mut manifest = RunManifest::new("converge", config, started, threads);
    manifest.note("x0_rounding", rounding_errors(config));
    manifest.note("resumed_rows", resumed);
    manifest.finish(dir, &[ENSEMBLE_CSV.into(), SUMMARY_JSON.into()])?;
    Ok(ConvergeOutcome::Complete)
}

pub fn bifurcate(config: &ExperimentConfig, dir: &Path, with_ensemble: bool, threads: usize) -> Result<(), CliError> {
    let started = unix_now();
    let study = run_bifurcation_study(config, with_ensemble)?;
    prepare_output_dir(dir)?;
    let mut csv = format!("{BIFURCATION_CSV_HEADER}\n");
    for (j, re, im) in &study.curve {
        csv.push_str(&format!("{j},{re},{im}\n"));
    }
    write_text(&dir.join(BIFURCATION_CSV), &csv)?;
    write_json(&dir.join(SUMMARY_JSON), &study.summary)?;
    let mut manifest = RunManifest::new("bifurcate", config, started, threads);
    if with_ensemble {
        manifest.note("x0_rounding", round_to_grid(&config.x0, config.largest_n()).1);
    }
    manifest.finish(dir, &[BIFURCATION_CSV.into(), SUMMARY_JSON.into()])?;
    Ok(())
}

/// Returns whether the coupling inequality held in every run.
pub fn couple(config: &ExperimentConfig, dir: &Path, store_runs: bool, threads: usize) -> Result<bool, CliError> {
    let started = unix_now();
    prepare_output_dir(dir)?;
    let study = run_coupling_study(config, store_runs.then_some(dir))?;
    let mut csv = format!("{DISCREPANCY_CSV_HEADER}\n");
    for r in &study.rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    write_text(&dir.join(DISCREPANCY_CSV), &csv)?;
    write_json(&dir.join(SUMMARY_JSON), &study.summary)?;
    let mut files = vec![DISCREPANCY_CSV.to_string(), SUMMARY_JSON.to_string()];
    for run in &study.stored {
        for f in ["m.bin", "m_hat.bin", "discrepancies.csv"] {
            files.push(format!("{run}/{f}"));
        }
    }
    let spec = config.spec();
    let mut manifest = RunManifest::new("couple", config, started, threads);
    manifest.note("x0_rounding", rounding_errors(config));
    manifest.note("interpolation_error_bound", interpolation_error_bound(config, &spec));
    manifest.note("stored_runs", &study.stored);
    manifest.finish(dir, &files)?;
    Ok(study.summary.verdicts.coupling_inequality_holds)
}
