//! Exact simulation of the density-profile jump process and of the
//! underlying spin system.
//!
//! The state is kept as integer counts `U_i = N x_i`, so every visited point
//! lies exactly on the grid `(1/N) Z^k`. From state `x` the chain jumps to
//! `x ± e_i / N` at rates `N f_i(x)` and `N g_i(x)`; channel selection runs on
//! the unscaled rates `f`, `g` and the clock accumulates unit-rate time, which
//! is divided by the time scale when events are reported. With time scale `N`
//! this is the density-profile process; with time scale `1` it is the
//! graphical-construction process, whose event times are exactly `N` times
//! larger.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{DensityVector, ModelSpec};
use crate::ode::Trajectory;
use crate::rng::RngStream;

/// Paths with more events than this must be streamed to disk.
pub const MAX_IN_MEMORY_EVENTS: usize = 100_000_000;

/// Largest system size accepted by the explicit spin-array simulator.
pub const MAX_FULL_SPIN_N: u32 = 10_000;

/// Tolerance on `N x0_i` being an integer.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    /// Zero-based spin type.
    pub type_index: u16,
    /// `+1` for an activation, `-1` for a deactivation.
    pub direction: i8,
}

/// Receives events as they are generated.
pub trait EventSink {
    fn record(&mut self, event: JumpEvent) -> Result<()>;
}

impl EventSink for Vec<JumpEvent> {
    fn record(&mut self, event: JumpEvent) -> Result<()> {
        if self.len() >= MAX_IN_MEMORY_EVENTS {
            return Err(Error::Resource(format!(
                "path exceeds {MAX_IN_MEMORY_EVENTS} in-memory events; stream it to an event log instead"
            )));
        }
        self.push(event);
        Ok(())
    }
}

/// A realization of a density-profile process on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath {
    pub n: u32,
    pub horizon: f64,
    pub seed: u64,
    pub initial_counts: Vec<u32>,
    pub events: Vec<JumpEvent>,
}

impl JumpPath {
    pub fn dim(&self) -> usize {
        self.initial_counts.len()
    }

    pub fn x0(&self) -> DensityVector {
        to_density(&self.initial_counts, self.n).into()
    }

    /// Counts after each event, starting with the initial counts.
    pub fn count_path(&self) -> impl Iterator<Item = Vec<u32>> + '_ {
        let mut counts = self.initial_counts.clone();
        std::iter::once(counts.clone()).chain(self.events.iter().map(move |e| {
            apply(&mut counts, e);
            counts.clone()
        }))
    }

    /// Counts at time `t` (state after the most recent event at or before `t`).
    pub fn counts_at(&self, t: f64) -> Vec<u32> {
        let mut counts = self.initial_counts.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            apply(&mut counts, e);
        }
        counts
    }

    pub fn terminal_counts(&self) -> Vec<u32> {
        let mut counts = self.initial_counts.clone();
        for e in &self.events {
            apply(&mut counts, e);
        }
        counts
    }

    pub fn terminal_state(&self) -> Vec<f64> {
        to_density(&self.terminal_counts(), self.n)
    }
}

fn apply(counts: &mut [u32], e: &JumpEvent) {
    let c = &mut counts[e.type_index as usize];
    if e.direction > 0 {
        *c += 1;
    } else {
        *c -= 1;
    }
}

pub fn to_density(counts: &[u32], n: u32) -> Vec<f64> {
    counts.iter().map(|c| f64::from(*c) / f64::from(n)).collect()
}

/// Exact grid counts `N x0`; errors when `x0` is off the grid.
pub fn grid_counts(x0: &[f64], n: u32) -> Result<Vec<u32>> {
    if n == 0 {
        return Err(Error::Input("system size N must be at least 1".into()));
    }
    x0.iter()
        .map(|v| {
            let scaled = v * f64::from(n);
            let rounded = scaled.round();
            if !(0.0..=1.0).contains(v) || (scaled - rounded).abs() > GRID_TOL * f64::from(n).max(1.0)
            {
                Err(Error::Input(format!(
                    "x0 component {v} is not a multiple of 1/{n} in [0, 1]"
                )))
            } else {
                Ok(rounded as u32)
            }
        })
        .collect()
}

/// Rounds `x0` to the nearest multiple of `1/N` inside `[0, 1]`; returns the
/// gridded point and the largest rounding displacement.
pub fn round_to_grid(x0: &[f64], n: u32) -> (Vec<f64>, f64) {
    let nf = f64::from(n);
    let gridded: Vec<f64> = x0.iter().map(|v| (v.clamp(0.0, 1.0) * nf).round() / nf).collect();
    let err = x0
        .iter()
        .zip(&gridded)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (gridded, err)
}

/// Picks the channel in which `target ∈ [0, total)` falls, skipping
/// channels with zero rate.
pub(crate) fn select_channel(rates: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (c, r) in rates.iter().enumerate() {
        if *r > 0.0 {
            acc += r;
            last_positive = c;
            if target < acc {
                return c;
            }
        }
    }
    last_positive
}

/// Event-driven simulation with rates `f, g` and reported time
/// `clock / time_scale`. Returns the number of recorded events.
fn run_chain<S: EventSink>(
    spec: &ModelSpec,
    counts: &mut [u32],
    n: u32,
    horizon: f64,
    time_scale: f64,
    rng: &mut ChaCha8Rng,
    sink: &mut S,
) -> Result<u64> {
    let k = spec.dim();
    let nf = f64::from(n);
    let mut x = vec![0.0; k];
    let mut f = vec![0.0; k];
    let mut g = vec![0.0; k];
    let mut channels = vec![0.0; 2 * k];
    let mut clock = 0.0f64;
    let mut recorded = 0u64;
    loop {
        for (xi, c) in x.iter_mut().zip(counts.iter()) {
            *xi = f64::from(*c) / nf;
        }
        spec.f_g_into(&x, &mut f, &mut g);
        let mut total = 0.0;
        for i in 0..k {
            channels[2 * i] = f[i];
            channels[2 * i + 1] = g[i];
            total += f[i] + g[i];
        }
        if total <= 0.0 {
            return Ok(recorded);
        }
        let wait: f64 = rng.sample(Exp1);
        clock += wait / total;
        let time = clock / time_scale;
        if time > horizon {
            return Ok(recorded);
        }
        let target = rng.random::<f64>() * total;
        let c = select_channel(&channels, target);
        let type_index = c / 2;
        let direction = if c % 2 == 0 { 1 } else { -1 };
        let event = JumpEvent {
            time,
            type_index: type_index as u16,
            direction,
        };
        apply(counts, &event);
        sink.record(event)?;
        recorded += 1;
    }
}

fn check_common(spec: &ModelSpec, x0: &[f64], n: u32, horizon: f64) -> Result<Vec<u32>> {
    if x0.len() != spec.dim() {
        return Err(Error::Input(format!(
            "x0 has length {} for a k = {} model",
            x0.len(),
            spec.dim()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Input(format!("horizon must be positive, got {horizon}")));
    }
    grid_counts(x0, n)
}

/// Streams the density-profile process into `sink`; returns the initial
/// counts and the number of events.
pub fn simulate_density_profile_into<S: EventSink>(
    spec: &ModelSpec,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
    sink: &mut S,
) -> Result<(Vec<u32>, u64)> {
    let initial = check_common(spec, x0, n, horizon)?;
    let mut counts = initial.clone();
    let mut rng = stream.rng();
    let events = run_chain(spec, &mut counts, n, horizon, f64::from(n), &mut rng, sink)?;
    Ok((initial, events))
}

/// Exact event-driven simulation of the density-profile process with jump
/// rates `N f_i(x)` and `N g_i(x)`.
pub fn simulate_density_profile(
    spec: &ModelSpec,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
) -> Result<JumpPath> {
    let mut events = Vec::new();
    let (initial_counts, _) = simulate_density_profile_into(spec, x0, n, horizon, stream, &mut events)?;
    Ok(JumpPath {
        n,
        horizon,
        seed: stream.seed(),
        initial_counts,
        events,
    })
}

/// The same chain with unscaled rates `f`, `g` (graphical-construction
/// time), run to `horizon`.
pub fn simulate_graphical(
    spec: &ModelSpec,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
) -> Result<JumpPath> {
    let initial_counts = check_common(spec, x0, n, horizon)?;
    let mut counts = initial_counts.clone();
    let mut events = Vec::new();
    let mut rng = stream.rng();
    run_chain(spec, &mut counts, n, horizon, 1.0, &mut rng, &mut events)?;
    Ok(JumpPath {
        n,
        horizon,
        seed: stream.seed(),
        initial_counts,
        events,
    })
}

/// Checks `m_t = g_{Nt}`: the graphical process run to `N T` with event
/// times divided by `N` reproduces the density-profile path exactly.
pub fn rescaling_consistency(
    spec: &ModelSpec,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
) -> Result<bool> {
    let direct = simulate_density_profile(spec, x0, n, horizon, stream)?;
    let mut slow = simulate_graphical(spec, x0, n, f64::from(n) * horizon, stream)?;
    for e in slow.events.iter_mut() {
        e.time /= f64::from(n);
    }
    Ok(direct.events == slow.events && direct.initial_counts == slow.initial_counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    /// Explicit `k × N` spin array.
    Full,
    /// Magnetization birth–death chain (the density-profile simulator).
    Aggregated,
}

/// Explicit spin configuration `η ∈ {-1, +1}^{k × N}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    k: usize,
    n: usize,
    values: Vec<i8>,
}

impl SpinConfig {
    /// Uniformly random configuration with exactly `counts[i]` up spins of
    /// type `i`.
    pub fn random_with_counts<R: Rng>(counts: &[u32], n: u32, rng: &mut R) -> Self {
        let n = n as usize;
        let mut values = Vec::with_capacity(counts.len() * n);
        for c in counts {
            let mut row: Vec<i8> = (0..n).map(|l| if l < *c as usize { 1 } else { -1 }).collect();
            row.shuffle(rng);
            values.extend(row);
        }
        Self {
            k: counts.len(),
            n,
            values,
        }
    }

    /// Independent spins with `P(η(i, ℓ) = +1) = p[i]`.
    pub fn bernoulli<R: Rng>(p: &[f64], n: u32, rng: &mut R) -> Self {
        let n = n as usize;
        let values = p
            .iter()
            .flat_map(|pi| (0..n).map(|_| if rng.random::<f64>() < *pi { 1 } else { -1 }).collect::<Vec<_>>())
            .collect();
        Self { k: p.len(), n, values }
    }

    pub fn get(&self, i: usize, site: usize) -> i8 {
        self.values[i * self.n + site]
    }

    pub fn flip(&mut self, i: usize, site: usize) {
        let v = &mut self.values[i * self.n + site];
        *v = -*v;
    }

    /// Number of `+1` spins per type.
    pub fn up_counts(&self) -> Vec<u32> {
        self.values
            .chunks(self.n)
            .map(|row| row.iter().filter(|v| **v > 0).count() as u32)
            .collect()
    }

    /// Empirical density profile `m(η)`.
    pub fn magnetization(&self) -> Vec<f64> {
        to_density(&self.up_counts(), self.n as u32)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn sites(&self) -> usize {
        self.n
    }
}

/// Simulates the spin system whose single-spin flip rates are `λ_i(m)` (up)
/// and `μ_i(m)` (down), recording the induced magnetization jumps.
///
/// `Full` mode keeps the explicit spin array and uses uniformization: sites
/// are proposed uniformly at total rate `k N B(m)`, with `B(m)` the largest
/// single-spin rate in the current state, and a proposed flip is accepted
/// with probability `rate / B(m)`.
pub fn simulate_spin_system(
    spec: &ModelSpec,
    x0: &[f64],
    n: u32,
    horizon: f64,
    stream: RngStream,
    mode: SpinMode,
) -> Result<JumpPath> {
    if mode == SpinMode::Aggregated {
        return simulate_density_profile(spec, x0, n, horizon, stream);
    }
    if n > MAX_FULL_SPIN_N {
        return Err(Error::Resource(format!(
            "full spin simulation is limited to N <= {MAX_FULL_SPIN_N}, got {n}"
        )));
    }
    let initial_counts = check_common(spec, x0, n, horizon)?;
    let k = spec.dim();
    let nf = f64::from(n);
    let mut rng = stream.rng();
    let mut spins = SpinConfig::random_with_counts(&initial_counts, n, &mut rng);
    let mut counts = initial_counts.clone();
    let mut x = to_density(&counts, n);
    let mut lambda = vec![0.0; k];
    let mut mu = vec![0.0; k];
    let mut events = Vec::new();
    let mut time = 0.0;
    let sites = (k as u64 * u64::from(n)) as f64;
    spec.rates_into(&x, &mut lambda, &mut mu);
    loop {
        let bound = lambda.iter().chain(&mu).fold(0.0f64, |m, v| m.max(*v));
        if bound <= 0.0 {
            break;
        }
        let wait: f64 = rng.sample(Exp1);
        time += wait / (sites * bound);
        if time > horizon {
            break;
        }
        let i = rng.random_range(0..k);
        let site = rng.random_range(0..n as usize);
        let up = spins.get(i, site) > 0;
        let rate = if up { mu[i] } else { lambda[i] };
        if rng.random::<f64>() * bound < rate {
            spins.flip(i, site);
            let event = JumpEvent {
                time,
                type_index: i as u16,
                direction: if up { -1 } else { 1 },
            };
            apply(&mut counts, &event);
            events.record(event)?;
            x[i] = f64::from(counts[i]) / nf;
            spec.rates_into(&x, &mut lambda, &mut mu);
        }
    }
    debug_assert_eq!(spins.up_counts(), counts);
    Ok(JumpPath {
        n,
        horizon,
        seed: stream.seed(),
        initial_counts,
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Euclidean,
    Max,
}

impl Norm {
    pub fn of(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(p, q)| (p - q).abs());
        match self {
            Norm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Max => diffs.fold(0.0, f64::max),
        }
    }
}

/// Largest sample spacing accepted by [`sup_distance`].
pub const MAX_SAMPLE_SPACING: f64 = 1e-2;

/// `sup_t |m_t - x_t|` over `[0, horizon]`, with the path piecewise constant
/// and the trajectory linear between samples.
///
/// The supremum of a convex function over each interval where both pieces
/// are affine sits at an endpoint, so it suffices to evaluate at every
/// sample time and on both sides of every jump.
pub fn sup_distance(path: &JumpPath, traj: &Trajectory, norm: Norm) -> Result<f64> {
    if traj.dim() != path.dim() {
        return Err(Error::Input("path and trajectory dimensions differ".into()));
    }
    if traj.horizon() + 1e-12 < path.horizon {
        return Err(Error::Input(format!(
            "trajectory covers [0, {}] but the path runs to {}",
            traj.horizon(),
            path.horizon
        )));
    }
    if traj.sample_spacing() > MAX_SAMPLE_SPACING + 1e-15 {
        return Err(Error::Input(format!(
            "trajectory sampling {} is coarser than {MAX_SAMPLE_SPACING}",
            traj.sample_spacing()
        )));
    }
    let mut counts = path.initial_counts.clone();
    let mut m = to_density(&counts, path.n);
    let mut x = vec![0.0; path.dim()];
    let mut sup = 0.0f64;
    let mut events = path.events.iter().peekable();
    let samples = traj
        .times
        .iter()
        .zip(&traj.states)
        .take_while(|(t, _)| **t <= path.horizon + 1e-12);
    for (t, state) in samples {
        while let Some(e) = events.next_if(|e| e.time <= *t) {
            traj.interpolate_into(e.time, &mut x);
            sup = sup.max(norm.of(&m, &x));
            apply(&mut counts, e);
            m = to_density(&counts, path.n);
            sup = sup.max(norm.of(&m, &x));
        }
        sup = sup.max(norm.of(&m, state));
    }
    for e in events {
        traj.interpolate_into(e.time, &mut x);
        sup = sup.max(norm.of(&m, &x));
        apply(&mut counts, e);
        m = to_density(&counts, path.n);
        sup = sup.max(norm.of(&m, &x));
    }
    traj.interpolate_into(path.horizon, &mut x);
    Ok(sup.max(norm.of(&m, &x)))
}
