//! The auxiliary independent-spin process that shadows the ODE, and its
//! coupling with the density-profile process.
//!
//! The auxiliary process `m̂` flips each spin independently at the
//! time-dependent rates `λ_i(x_t)` (up) and `μ_i(x_t)` (down), where `x_t`
//! solves the limiting ODE. Time dependence is handled by thinning against
//! the constant envelope `N d`, `d = Σ_i (sup λ_i + sup μ_i)`.
//!
//! In the coupled chain the two processes share a clock for the common part
//! of each jump rate and use private clocks for the excess. A private event
//! moves only one of them and is a *discrepancy*; between discrepancies the
//! pair moves rigidly, so the separation `Δ = m̂ - m` only changes by one grid
//! step at a time and `‖m_t - m̂_t‖∞ ≤ D̄_t / N`.
//!
//! The staged construction (a fresh set of marks after every discrepancy)
//! is realised as a single Markov chain on `(m, Δ)`: fresh exponential
//! clocks at every step are distributionally the same as restarting the
//! mark processes at each discrepancy time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump::{grid_counts, select_channel, to_density, JumpEvent, JumpPath, SpinConfig, MAX_FULL_SPIN_N};
use crate::model::ModelSpec;
use crate::ode::Trajectory;
use crate::rng::RngStream;

/// Relative slack on the thinning envelope before a violation is reported.
const ENVELOPE_SLACK: f64 = 1e-9;

/// Coarsest ODE step accepted for the time-dependent rates.
pub const MAX_TRAJECTORY_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Start exactly at `x0`.
    Exact,
    /// Independent `Bin(N, x0_i) / N` starting components.
    Binomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryPath {
    pub path: JumpPath,
    pub init: InitMode,
}

fn check_trajectory(traj: &Trajectory, x0: &[f64], horizon: f64) -> Result<()> {
    if traj.dim() != x0.len() {
        return Err(Error::Input("trajectory and x0 dimensions differ".into()));
    }
    if traj.horizon() + 1e-12 < horizon {
        return Err(Error::Input(format!(
            "trajectory covers [0, {}] but the horizon is {horizon}",
            traj.horizon()
        )));
    }
    if traj.step > MAX_TRAJECTORY_STEP * (1.0 + 1e-12) {
        return Err(Error::Input(format!(
            "trajectory step {} is coarser than {MAX_TRAJECTORY_STEP}",
            traj.step
        )));
    }
    let start = &traj.states[0];
    if start.iter().zip(x0).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::Input(format!(
            "trajectory starts at {:?}, not at x0 = {x0:?}",
            start.0
        )));
    }
    Ok(())
}

fn envelope(spec: &ModelSpec, n: u32) -> f64 {
    f64::from(n) * spec.lipschitz_bound().envelope * (1.0 + ENVELOPE_SLACK)
}

/// Simulates the auxiliary process `m̂` on `[0, horizon]` by thinning.
pub fn simulate_auxiliary(
    spec: &ModelSpec,
    traj: &Trajectory,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
    init: InitMode,
) -> Result<AuxiliaryPath> {
    check_trajectory(traj, x0, horizon)?;
    let k = spec.dim();
    let mut rng = stream.rng();
    let initial_counts = match init {
        InitMode::Exact => grid_counts(x0, n)?,
        InitMode::Binomial => x0
            .iter()
            .map(|p| {
                let bin = Binomial::new(u64::from(n), p.clamp(0.0, 1.0))
                    .map_err(|e| Error::Input(format!("binomial start: {e}")))?;
                Ok(bin.sample(&mut rng) as u32)
            })
            .collect::<Result<Vec<u32>>>()?,
    };
    let mut counts = initial_counts.clone();
    let nf = f64::from(n);
    let env = envelope(spec, n);
    let mut xt = vec![0.0; k];
    let mut lambda = vec![0.0; k];
    let mut mu = vec![0.0; k];
    let mut channels = vec![0.0; 2 * k];
    let mut events = Vec::new();
    let mut time = 0.0;
    if env > 0.0 {
        loop {
            let wait: f64 = rng.sample(Exp1);
            time += wait / env;
            if time > horizon {
                break;
            }
            traj.interpolate_into(time, &mut xt);
            spec.rates_into(&xt, &mut lambda, &mut mu);
            let mut total = 0.0;
            for i in 0..k {
                let up = f64::from(counts[i]);
                channels[2 * i] = (nf - up) * lambda[i];
                channels[2 * i + 1] = up * mu[i];
                total += channels[2 * i] + channels[2 * i + 1];
            }
            if total > env {
                return Err(Error::Envelope {
                    rate: total,
                    envelope: env,
                    time,
                });
            }
            let target = rng.random::<f64>() * env;
            if target >= total {
                continue;
            }
            let c = select_channel(&channels, target);
            let i = c / 2;
            let direction = if c % 2 == 0 { 1 } else { -1 };
            if direction > 0 {
                counts[i] += 1;
            } else {
                counts[i] -= 1;
            }
            events.push(JumpEvent {
                time,
                type_index: i as u16,
                direction,
            });
        }
    }
    Ok(AuxiliaryPath {
        path: JumpPath {
            n,
            horizon,
            seed: stream.seed(),
            initial_counts,
            events,
        },
        init,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Process {
    /// The density-profile process `m`.
    #[serde(rename = "m")]
    Density,
    /// The auxiliary process `m̂`.
    #[serde(rename = "m_hat")]
    Auxiliary,
}

impl Process {
    pub fn label(self) -> &'static str {
        match self {
            Process::Density => "m",
            Process::Auxiliary => "m_hat",
        }
    }
}

/// One asynchronous move of the coupled pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// One-based index `l` of the discrepancy time `τ_l`.
    pub index: usize,
    pub time: f64,
    pub type_index: u16,
    pub direction: i8,
    pub process: Process,
    /// `N |Δ|₁` right after the move.
    pub delta_l1_after: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub m_path: JumpPath,
    pub m_hat_path: JumpPath,
    pub discrepancies: Vec<Discrepancy>,
}

impl CoupledRun {
    pub fn n(&self) -> u32 {
        self.m_path.n
    }

    /// Total number of discrepancies on `[0, horizon]`.
    pub fn total_discrepancies(&self) -> usize {
        self.discrepancies.len()
    }

    /// Separation `Δ = N (m̂ - m)` in grid units, starting at zero and
    /// updated after every discrepancy.
    pub fn separation(&self) -> Vec<(f64, Vec<i64>)> {
        let k = self.m_path.dim();
        let mut delta: Vec<i64> = self
            .m_hat_path
            .initial_counts
            .iter()
            .zip(&self.m_path.initial_counts)
            .map(|(a, b)| i64::from(*a) - i64::from(*b))
            .collect();
        let mut out = vec![(0.0, delta.clone())];
        debug_assert_eq!(delta.len(), k);
        for d in &self.discrepancies {
            let step = i64::from(d.direction);
            match d.process {
                Process::Density => delta[d.type_index as usize] -= step,
                Process::Auxiliary => delta[d.type_index as usize] += step,
            }
            out.push((d.time, delta.clone()));
        }
        out
    }

    /// Checks `‖m_t - m̂_t‖∞ ≤ D̄_t / N` at every event time.
    pub fn check_coupling_inequality(&self) -> std::result::Result<usize, CouplingViolation> {
        let times: Vec<f64> = self.discrepancies.iter().map(|d| d.time).collect();
        check_coupling_inequality(&self.m_path, &self.m_hat_path, &times)
    }

    /// The shared (synchronous) moves of the two processes coincide.
    pub fn lockstep_holds(&self) -> bool {
        let private = |p: Process| -> Vec<(u64, u16, i8)> {
            self.discrepancies
                .iter()
                .filter(|d| d.process == p)
                .map(|d| (d.time.to_bits(), d.type_index, d.direction))
                .collect()
        };
        let shared = |path: &JumpPath, own: Vec<(u64, u16, i8)>| -> Vec<JumpEvent> {
            let own: std::collections::HashSet<_> = own.into_iter().collect();
            path.events
                .iter()
                .filter(|e| !own.contains(&(e.time.to_bits(), e.type_index, e.direction)))
                .copied()
                .collect()
        };
        shared(&self.m_path, private(Process::Density))
            == shared(&self.m_hat_path, private(Process::Auxiliary))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingViolation {
    pub time: f64,
    pub separation: u64,
    pub discrepancies: usize,
}

impl std::fmt::Display for CouplingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "at t = {}: N|m - m_hat|_inf = {} exceeds the {} discrepancies so far",
            self.time, self.separation, self.discrepancies
        )
    }
}

/// Replays two paths and a list of discrepancy times, checking the coupling
/// inequality exactly (in grid units) after every event. Returns the number
/// of event times checked.
pub fn check_coupling_inequality(
    m: &JumpPath,
    m_hat: &JumpPath,
    discrepancy_times: &[f64],
) -> std::result::Result<usize, CouplingViolation> {
    let mut y = m.initial_counts.clone();
    let mut z = m_hat.initial_counts.clone();
    let sep = |y: &[u32], z: &[u32]| {
        y.iter()
            .zip(z)
            .map(|(a, b)| u64::from(a.abs_diff(*b)))
            .max()
            .unwrap_or(0)
    };
    let initial = sep(&y, &z);
    if initial > 0 {
        return Err(CouplingViolation {
            time: 0.0,
            separation: initial,
            discrepancies: 0,
        });
    }
    let (mut i, mut j, mut d) = (0, 0, 0);
    let mut checked = 0;
    while i < m.events.len() || j < m_hat.events.len() {
        let t = match (m.events.get(i), m_hat.events.get(j)) {
            (Some(a), Some(b)) => a.time.min(b.time),
            (Some(a), None) => a.time,
            (None, Some(b)) => b.time,
            (None, None) => unreachable!(),
        };
        while let Some(e) = m.events.get(i).filter(|e| e.time <= t) {
            step(&mut y, e);
            i += 1;
        }
        while let Some(e) = m_hat.events.get(j).filter(|e| e.time <= t) {
            step(&mut z, e);
            j += 1;
        }
        while d < discrepancy_times.len() && discrepancy_times[d] <= t {
            d += 1;
        }
        let s = sep(&y, &z);
        if s > d as u64 {
            return Err(CouplingViolation {
                time: t,
                separation: s,
                discrepancies: d,
            });
        }
        checked += 1;
    }
    Ok(checked)
}

fn step(counts: &mut [u32], e: &JumpEvent) {
    let c = &mut counts[e.type_index as usize];
    if e.direction > 0 {
        *c += 1;
    } else {
        *c -= 1;
    }
}

/// Simulates the coupled pair `(m, m̂)` from a common start `x0`.
///
/// For type `i` and the up direction, with `A = N(1 - y_i) λ_i(y)` and
/// `B = N(1 - y_i - Δ_i) λ_i(x_t)`, both processes move together at rate
/// `min(A, B)`; `m` alone moves at `A - min` and `m̂` alone at `B - min`.
/// The down direction uses `N y_i μ_i(y)` and `N (y_i + Δ_i) μ_i(x_t)`.
pub fn simulate_coupled(
    spec: &ModelSpec,
    traj: &Trajectory,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
) -> Result<CoupledRun> {
    check_trajectory(traj, x0, horizon)?;
    let initial = grid_counts(x0, n)?;
    let k = spec.dim();
    let nf = f64::from(n);
    let mut rng: ChaCha8Rng = stream.rng();
    let env = envelope(spec, n);

    let mut y = initial.clone();
    let mut z = initial.clone();
    let mut y_density = to_density(&y, n);
    let (mut lam_y, mut mu_y) = spec.rates(&y_density);
    let mut xt = vec![0.0; k];
    let mut lam_x = vec![0.0; k];
    let mut mu_x = vec![0.0; k];
    // per type: [shared+, m+, m̂+, shared-, m-, m̂-]
    let mut channels = vec![0.0; 6 * k];
    let mut m_events = Vec::new();
    let mut hat_events = Vec::new();
    let mut discrepancies = Vec::new();
    let mut delta_l1: u64 = 0;
    let mut time = 0.0;

    if env > 0.0 {
        loop {
            let wait: f64 = rng.sample(Exp1);
            time += wait / env;
            if time > horizon {
                break;
            }
            traj.interpolate_into(time, &mut xt);
            spec.rates_into(&xt, &mut lam_x, &mut mu_x);
            let mut total = 0.0;
            for i in 0..k {
                let (yi, zi) = (f64::from(y[i]), f64::from(z[i]));
                let a_up = (nf - yi) * lam_y[i];
                let b_up = (nf - zi) * lam_x[i];
                let a_dn = yi * mu_y[i];
                let b_dn = zi * mu_x[i];
                let s_up = a_up.min(b_up);
                let s_dn = a_dn.min(b_dn);
                let c = &mut channels[6 * i..6 * i + 6];
                c[0] = s_up;
                c[1] = a_up - s_up;
                c[2] = b_up - s_up;
                c[3] = s_dn;
                c[4] = a_dn - s_dn;
                c[5] = b_dn - s_dn;
                total += a_up.max(b_up) + a_dn.max(b_dn);
            }
            if total > env {
                return Err(Error::Envelope {
                    rate: total,
                    envelope: env,
                    time,
                });
            }
            let target = rng.random::<f64>() * env;
            if target >= total {
                continue;
            }
            let c = select_channel(&channels, target);
            let i = c / 6;
            let kind = c % 6;
            let direction: i8 = if kind < 3 { 1 } else { -1 };
            let event = JumpEvent {
                time,
                type_index: i as u16,
                direction,
            };
            let moves_m = matches!(kind, 0 | 1 | 3 | 4);
            let moves_hat = matches!(kind, 0 | 2 | 3 | 5);
            if moves_m {
                step(&mut y, &event);
                m_events.push(event);
                y_density[i] = f64::from(y[i]) / nf;
                spec.rates_into(&y_density, &mut lam_y, &mut mu_y);
            }
            if moves_hat {
                step(&mut z, &event);
                hat_events.push(event);
            }
            if moves_m != moves_hat {
                delta_l1 = y.iter().zip(&z).map(|(a, b)| u64::from(a.abs_diff(*b))).sum();
                discrepancies.push(Discrepancy {
                    index: discrepancies.len() + 1,
                    time,
                    type_index: i as u16,
                    direction,
                    process: if moves_m {
                        Process::Density
                    } else {
                        Process::Auxiliary
                    },
                    delta_l1_after: delta_l1,
                });
            }
        }
    }
    let _ = delta_l1;
    let path = |events| JumpPath {
        n,
        horizon,
        seed: stream.seed(),
        initial_counts: initial.clone(),
        events,
    };
    Ok(CoupledRun {
        m_path: path(m_events),
        m_hat_path: path(hat_events),
        discrepancies,
    })
}

/// Per-`N` statistics of the total discrepancy count `D̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub runs: usize,
    pub max: usize,
    pub mean: f64,
    /// `N^{ε + 1/2}`.
    pub threshold: f64,
    /// Fraction of runs with `D̄ ≥ N^{ε + 1/2}`.
    pub exceed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySummary {
    pub epsilon: f64,
    pub rows: Vec<DiscrepancyRow>,
    /// Log-log slope of the mean count against `N` (three or more sizes).
    pub mean_fit: Option<crate::stats::LinearFit>,
}

pub fn discrepancy_threshold(n: u32, epsilon: f64) -> f64 {
    f64::from(n).powf(epsilon + 0.5)
}

/// Summarizes `(N, D̄)` pairs.
pub fn summarize_discrepancy_counts(counts: &[(u32, usize)], epsilon: f64) -> Result<DiscrepancySummary> {
    if counts.is_empty() {
        return Err(Error::Input("no coupled runs to summarize".into()));
    }
    let mut sizes: Vec<u32> = counts.iter().map(|(n, _)| *n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let rows: Vec<DiscrepancyRow> = sizes
        .iter()
        .map(|&n| {
            let d: Vec<usize> = counts.iter().filter(|(m, _)| *m == n).map(|(_, d)| *d).collect();
            let threshold = discrepancy_threshold(n, epsilon);
            let exceeded = d.iter().filter(|v| **v as f64 >= threshold).count();
            DiscrepancyRow {
                n,
                runs: d.len(),
                max: d.iter().copied().max().unwrap_or(0),
                mean: d.iter().sum::<usize>() as f64 / d.len() as f64,
                threshold,
                exceed_fraction: exceeded as f64 / d.len() as f64,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| f64::from(r.n)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    Ok(DiscrepancySummary {
        epsilon,
        mean_fit: crate::stats::log_log_fit(&xs, &ys),
        rows,
    })
}

/// Per-`N` discrepancy statistics of a collection of coupled runs sharing
/// a horizon.
pub fn discrepancy_summary(runs: &[CoupledRun], epsilon: f64) -> Result<DiscrepancySummary> {
    let Some(first) = runs.first() else {
        return Err(Error::Input("no coupled runs to summarize".into()));
    };
    if runs.iter().any(|r| r.m_path.horizon != first.m_path.horizon) {
        return Err(Error::Input("coupled runs have different horizons".into()));
    }
    let counts: Vec<(u32, usize)> = runs.iter().map(|r| (r.n(), r.total_discrepancies())).collect();
    summarize_discrepancy_counts(&counts, epsilon)
}

/// History of the initialization coupling between an exact start and a
/// binomial start, both evolving as auxiliary spin systems.
#[derive(Debug, Clone, PartialEq)]
pub struct InitCouplingRun {
    pub exact: JumpPath,
    pub binomial: JumpPath,
    /// Event times, starting with `0`.
    pub times: Vec<f64>,
    /// Per-type number of disagreeing sites after each event.
    pub disagreements: Vec<Vec<u32>>,
}

/// Couples `m̂^{x0,N}` (uniform configuration with `m = x0`) and
/// `m̂^{b(x0),N}` (independent Bernoulli spins) site by site: agreeing sites
/// flip together, disagreeing sites evolve independently until one of the
/// pair flips, after which they agree for ever.
pub fn simulate_init_coupling(
    spec: &ModelSpec,
    traj: &Trajectory,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
) -> Result<InitCouplingRun> {
    check_trajectory(traj, x0, horizon)?;
    if n > MAX_FULL_SPIN_N {
        return Err(Error::Resource(format!(
            "explicit spin coupling is limited to N <= {MAX_FULL_SPIN_N}, got {n}"
        )));
    }
    let counts = grid_counts(x0, n)?;
    let k = spec.dim();
    let mut rng = stream.rng();
    let mut exact = SpinConfig::random_with_counts(&counts, n, &mut rng);
    let mut bin = SpinConfig::bernoulli(x0, n, &mut rng);
    let exact_initial = exact.up_counts();
    let bin_initial = bin.up_counts();
    let (sup_l, sup_m) = spec.rate_suprema();
    let bound = 2.0 * sup_l.iter().chain(&sup_m).fold(0.0f64, |m, v| m.max(*v)) * (1.0 + ENVELOPE_SLACK);
    let sites = k * n as usize;
    let disagreement = |a: &SpinConfig, b: &SpinConfig| -> Vec<u32> {
        (0..k)
            .map(|i| (0..n as usize).filter(|l| a.get(i, *l) != b.get(i, *l)).count() as u32)
            .collect()
    };
    let mut current = disagreement(&exact, &bin);
    let mut times = vec![0.0];
    let mut history = vec![current.clone()];
    let mut exact_events = Vec::new();
    let mut bin_events = Vec::new();
    let mut xt = vec![0.0; k];
    let mut lambda = vec![0.0; k];
    let mut mu = vec![0.0; k];
    let mut time = 0.0;
    let flip_event = |time: f64, i: usize, up: bool| JumpEvent {
        time,
        type_index: i as u16,
        direction: if up { -1 } else { 1 },
    };
    if bound > 0.0 && sites > 0 {
        loop {
            let wait: f64 = rng.sample(Exp1);
            time += wait / (sites as f64 * bound);
            if time > horizon {
                break;
            }
            let i = rng.random_range(0..k);
            let l = rng.random_range(0..n as usize);
            traj.interpolate_into(time, &mut xt);
            spec.rates_into(&xt, &mut lambda, &mut mu);
            let rate_of = |up: bool| if up { mu[i] } else { lambda[i] };
            let (a_up, b_up) = (exact.get(i, l) > 0, bin.get(i, l) > 0);
            let target = rng.random::<f64>() * bound;
            if a_up == b_up {
                if target < rate_of(a_up) {
                    exact.flip(i, l);
                    bin.flip(i, l);
                    exact_events.push(flip_event(time, i, a_up));
                    bin_events.push(flip_event(time, i, b_up));
                } else {
                    continue;
                }
            } else {
                let (ra, rb) = (rate_of(a_up), rate_of(b_up));
                if ra + rb > bound {
                    return Err(Error::Envelope {
                        rate: ra + rb,
                        envelope: bound,
                        time,
                    });
                }
                if target < ra {
                    exact.flip(i, l);
                    exact_events.push(flip_event(time, i, a_up));
                } else if target < ra + rb {
                    bin.flip(i, l);
                    bin_events.push(flip_event(time, i, b_up));
                } else {
                    continue;
                }
                current[i] -= 1;
            }
            times.push(time);
            history.push(current.clone());
        }
    }
    debug_assert_eq!(current, disagreement(&exact, &bin));
    let path = |initial_counts, events| JumpPath {
        n,
        horizon,
        seed: stream.seed(),
        initial_counts,
        events,
    };
    Ok(InitCouplingRun {
        exact: path(exact_initial, exact_events),
        binomial: path(bin_initial, bin_events),
        times,
        disagreements: history,
    })
}
