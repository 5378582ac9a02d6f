//! The experiments behind the `converge`, `bifurcate` and `couple`
//! subcommands, as plain functions returning in-memory results.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinflow::coupling::{discrepancy_threshold, summarize_discrepancy_counts, DiscrepancySummary};
use spinflow::eventlog::save_coupled_run;
use spinflow::jump::{round_to_grid, MAX_IN_MEMORY_EVENTS};
use spinflow::rng::replica_seed;
use spinflow::stability::{leading_eigenvalue_at_half, BifurcationResult};
use spinflow::stats::{log_log_fit, mean, median, LinearFit};
use spinflow::{
    bifurcation_scan, integrate, simulate_coupled, simulate_density_profile, sup_distance, ModelSpec, Norm, RngStream,
    Trajectory,
};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Number of points on the tabulated leading-eigenvalue curve.
pub const CURVE_POINTS: usize = 201;

/// Relative offset of the couplings used for the finite-N signature.
pub const SIGNATURE_OFFSET: f64 = 0.1;

pub const ENSEMBLE_CSV_HEADER: &str = "N,replica,seed,sup_dist_euclid,sup_dist_max,events";
pub const BIFURCATION_CSV_HEADER: &str = "J,max_real_part,imag_part";
pub const DISCREPANCY_CSV_HEADER: &str = "N,replica,D_total,exceeded";

pub fn trajectory(config: &ExperimentConfig, spec: &ModelSpec, x0: &[f64]) -> Result<Trajectory, CliError> {
    Ok(integrate(spec, x0, config.horizon, config.step, config.sample_every)?)
}

/// Rejects sizes whose paths could not be held in memory.
pub fn check_feasible(spec: &ModelSpec, n: u32, horizon: f64) -> Result<(), CliError> {
    let bound = f64::from(n) * horizon * spec.lipschitz_bound().envelope;
    if bound > MAX_IN_MEMORY_EVENTS as f64 {
        return Err(CliError::Runtime(spinflow::Error::Resource(format!(
            "N = {n} may produce up to {bound:.3e} events, above the in-memory limit of {MAX_IN_MEMORY_EVENTS}"
        ))));
    }
    Ok(())
}

/// Largest `|x0 - gridded x0|` for every size in the grid.
pub fn rounding_errors(config: &ExperimentConfig) -> BTreeMap<String, f64> {
    config
        .n_grid
        .iter()
        .map(|&n| (n.to_string(), round_to_grid(&config.x0, n).1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow {
    pub n: u32,
    pub replica: u64,
    pub seed: u64,
    pub sup_dist_euclid: f64,
    pub sup_dist_max: f64,
    pub events: u64,
}

impl EnsembleRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n, self.replica, self.seed, self.sup_dist_euclid, self.sup_dist_max, self.events
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            n: f[0].parse().ok()?,
            replica: f[1].parse().ok()?,
            seed: f[2].parse().ok()?,
            sup_dist_euclid: f[3].parse().ok()?,
            sup_dist_max: f[4].parse().ok()?,
            events: f[5].parse().ok()?,
        })
    }
}

/// All `(N, replica)` pairs of a study in output order.
pub fn jobs(config: &ExperimentConfig) -> Vec<(u32, u64)> {
    config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.replicas).map(move |r| (n, r)))
        .collect()
}

pub fn ensemble_row(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    traj: &Trajectory,
    n: u32,
    replica: u64,
) -> Result<EnsembleRow, CliError> {
    let (x0, _) = round_to_grid(&config.x0, n);
    let seed = replica_seed(config.master_seed, n.into(), replica);
    let path = simulate_density_profile(spec, &x0, n, config.horizon, RngStream::new(seed, 0))?;
    Ok(EnsembleRow {
        n,
        replica,
        seed,
        sup_dist_euclid: sup_distance(&path, traj, Norm::Euclidean)?,
        sup_dist_max: sup_distance(&path, traj, Norm::Max)?,
        events: path.events.len() as u64,
    })
}

pub fn ensemble_rows(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    traj: &Trajectory,
    jobs: &[(u32, u64)],
) -> Result<Vec<EnsembleRow>, CliError> {
    jobs.par_iter()
        .map(|&(n, r)| ensemble_row(config, spec, traj, n, r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub replicas: usize,
    pub median_sup_dist: f64,
    pub mean_sup_dist: f64,
    pub max_sup_dist: f64,
    /// `N^{-1/2 + ε}`.
    pub threshold: f64,
    /// Fraction of replicas with sup distance above the threshold.
    pub exceed_fraction: f64,
    pub mean_events: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub command: String,
    pub epsilon: f64,
    pub norm: String,
    pub rows: Vec<ConvergenceRow>,
    /// Fit of log median sup distance against log N.
    pub fit: Option<LinearFit>,
}

pub fn summarize_ensemble(config: &ExperimentConfig, rows: &[EnsembleRow]) -> EnsembleSummary {
    let per_n: Vec<ConvergenceRow> = config
        .n_grid
        .iter()
        .map(|&n| {
            let d: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.sup_dist_euclid).collect();
            let events: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.events as f64).collect();
            let threshold = f64::from(n).powf(config.epsilon - 0.5);
            ConvergenceRow {
                n,
                replicas: d.len(),
                median_sup_dist: median(&d),
                mean_sup_dist: mean(&d),
                max_sup_dist: d.iter().copied().fold(0.0, f64::max),
                threshold,
                exceed_fraction: d.iter().filter(|v| **v > threshold).count() as f64 / d.len() as f64,
                mean_events: mean(&events),
            }
        })
        .collect();
    let xs: Vec<f64> = per_n.iter().map(|r| f64::from(r.n)).collect();
    let ys: Vec<f64> = per_n.iter().map(|r| r.median_sup_dist).collect();
    EnsembleSummary {
        command: "converge".into(),
        epsilon: config.epsilon,
        norm: "euclidean".into(),
        fit: log_log_fit(&xs, &ys),
        rows: per_n,
    }
}

/// Runs the whole convergence study in memory.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<(Vec<EnsembleRow>, EnsembleSummary), CliError> {
    let spec = config.spec();
    for &n in &config.n_grid {
        check_feasible(&spec, n, config.horizon)?;
    }
    let traj = trajectory(config, &spec, &config.x0)?;
    let rows = ensemble_rows(config, &spec, &traj, &jobs(config))?;
    let summary = summarize_ensemble(config, &rows);
    Ok((rows, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    #[serde(rename = "J")]
    pub coupling: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub replicas: usize,
    /// Standard deviation of the terminal density of each type across
    /// replicas.
    pub terminal_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSummary {
    pub command: String,
    #[serde(flatten)]
    pub result: BifurcationResult,
    pub resolution: f64,
    pub finite_n: Vec<DispersionRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationStudy {
    pub summary: BifurcationSummary,
    /// `(J, max real part, imaginary part)` of the leading eigenvalue at ½.
    pub curve: Vec<(f64, f64, f64)>,
}

pub fn run_bifurcation_study(config: &ExperimentConfig, with_ensemble: bool) -> Result<BifurcationStudy, CliError> {
    let family = config
        .model
        .cyclic()
        .ok_or_else(|| CliError::Config("bifurcate needs a cyclic model".into()))?
        .clone();
    let range = config
        .j_range
        .ok_or_else(|| CliError::Config("bifurcate needs J_range".into()))?;
    let result = bifurcation_scan(&family, range, config.resolution)?;
    let curve = (0..CURVE_POINTS)
        .map(|i| {
            let j = range.0 + (range.1 - range.0) * i as f64 / (CURVE_POINTS - 1) as f64;
            let z = leading_eigenvalue_at_half(&family, j)?;
            Ok((j, z.re, z.im.abs()))
        })
        .collect::<Result<Vec<_>, spinflow::Error>>()?;

    let mut finite_n = Vec::new();
    if with_ensemble {
        let n = config.largest_n();
        let (x0, _) = round_to_grid(&config.x0, n);
        for j in [result.critical * (1.0 - SIGNATURE_OFFSET), result.critical * (1.0 + SIGNATURE_OFFSET)] {
            let spec = ModelSpec::cyclic(&family.with_coupling(j))?;
            check_feasible(&spec, n, config.horizon)?;
            let terminal = (0..config.replicas)
                .into_par_iter()
                .map(|r| {
                    let stream = RngStream::new(replica_seed(config.master_seed, n.into(), r), 0);
                    Ok(simulate_density_profile(&spec, &x0, n, config.horizon, stream)?.terminal_state())
                })
                .collect::<Result<Vec<Vec<f64>>, spinflow::Error>>()?;
            let terminal_std = (0..family.k)
                .map(|i| {
                    let xs: Vec<f64> = terminal.iter().map(|t| t[i]).collect();
                    if xs.len() < 2 {
                        0.0
                    } else {
                        spinflow::stats::variance(&xs).sqrt()
                    }
                })
                .collect();
            finite_n.push(DispersionRow {
                coupling: j,
                n,
                replicas: terminal.len(),
                terminal_std,
            });
        }
    }
    Ok(BifurcationStudy {
        summary: BifurcationSummary {
            command: "bifurcate".into(),
            result,
            resolution: config.resolution,
            finite_n,
        },
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingRow {
    pub n: u32,
    pub replica: u64,
    pub d_total: usize,
    pub exceeded: bool,
}

impl CouplingRow {
    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", self.n, self.replica, self.d_total, u8::from(self.exceeded))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingVerdicts {
    /// `‖m_t - m̂_t‖∞ ≤ D̄_t / N` held at every event of every run.
    pub coupling_inequality_holds: bool,
    pub runs_checked: usize,
    pub exceedance_nonincreasing: bool,
    pub exceedance_zero_at_largest_n: bool,
    /// Log-log slope of the mean count below 3/4 (needs three sizes).
    pub sublinear_growth: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub command: String,
    #[serde(flatten)]
    pub discrepancies: DiscrepancySummary,
    pub verdicts: CouplingVerdicts,
}

pub struct CouplingStudy {
    pub rows: Vec<CouplingRow>,
    pub summary: CouplingSummary,
    /// Directories of stored runs, relative to the output directory.
    pub stored: Vec<String>,
}

pub fn run_dir_name(n: u32, replica: u64) -> String {
    format!("runs/N{n}_r{replica}")
}

/// Bound on the interpolation error of the ODE rates seen by the coupled
/// processes: spacing × Lipschitz constant × largest rate.
pub fn interpolation_error_bound(config: &ExperimentConfig, spec: &ModelSpec) -> f64 {
    let (sl, sm) = spec.rate_suprema();
    let sup_rate = sl.iter().chain(&sm).copied().fold(0.0, f64::max);
    config.sample_every * spec.lipschitz_bound().constant * sup_rate
}

pub fn run_coupling_study(config: &ExperimentConfig, store: Option<&Path>) -> Result<CouplingStudy, CliError> {
    let spec = config.spec();
    let mut trajectories = BTreeMap::new();
    for &n in &config.n_grid {
        check_feasible(&spec, n, config.horizon)?;
        let (x0, _) = round_to_grid(&config.x0, n);
        let key: Vec<u64> = x0.iter().map(|v| v.to_bits()).collect();
        if !trajectories.contains_key(&key) {
            trajectories.insert(key, trajectory(config, &spec, &x0)?);
        }
    }
    let results = jobs(config)
        .par_iter()
        .map(|&(n, r)| {
            let (x0, _) = round_to_grid(&config.x0, n);
            let key: Vec<u64> = x0.iter().map(|v| v.to_bits()).collect();
            let traj = &trajectories[&key];
            let stream = RngStream::new(replica_seed(config.master_seed, n.into(), r), 0);
            let run = simulate_coupled(&spec, traj, &x0, n, config.horizon, stream)?;
            let holds = run.check_coupling_inequality().is_ok();
            let mut stored = None;
            if let Some(dir) = store {
                let name = run_dir_name(n, r);
                save_coupled_run(&run, &dir.join(&name))?;
                stored = Some(name);
            }
            let d = run.total_discrepancies();
            Ok((
                CouplingRow {
                    n,
                    replica: r,
                    d_total: d,
                    exceeded: d as f64 >= discrepancy_threshold(n, config.epsilon),
                },
                holds,
                stored,
            ))
        })
        .collect::<Result<Vec<_>, spinflow::Error>>()?;

    let rows: Vec<CouplingRow> = results.iter().map(|r| r.0).collect();
    let counts: Vec<(u32, usize)> = rows.iter().map(|r| (r.n, r.d_total)).collect();
    let discrepancies = summarize_discrepancy_counts(&counts, config.epsilon)?;
    let fractions: Vec<f64> = discrepancies.rows.iter().map(|r| r.exceed_fraction).collect();
    let verdicts = CouplingVerdicts {
        coupling_inequality_holds: results.iter().all(|r| r.1),
        runs_checked: results.len(),
        exceedance_nonincreasing: fractions.windows(2).all(|w| w[1] <= w[0]),
        exceedance_zero_at_largest_n: fractions.last() == Some(&0.0),
        sublinear_growth: discrepancies.mean_fit.map(|f| f.slope < 0.75),
    };
    Ok(CouplingStudy {
        rows,
        summary: CouplingSummary {
            command: "couple".into(),
            discrepancies,
            verdicts,
        },
        stored: results.into_iter().filter_map(|r| r.2).collect(),
    })
}
