//! Fixed-step integration of the limiting dynamics `ẋ = V(x)`.

use crate::error::{Error, Result};
use crate::model::{DensityVector, ModelSpec};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// How far outside `[0, 1]^k` a state may drift before the step is declared
/// too large.
pub const EXIT_TOLERANCE: f64 = 1e-6;

/// Sampled solution of `ẋ = V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityVector>,
    /// Integration step actually requested.
    pub step: f64,
    sample_every: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.dim())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn sample_spacing(&self) -> f64 {
        self.sample_every
    }

    pub fn final_state(&self) -> &DensityVector {
        self.states.last().expect("trajectories are never empty")
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.times.len() - 1;
        if last == 0 || t <= 0.0 {
            return 0;
        }
        // samples sit on a uniform grid except possibly the final one
        let mut idx = ((t / self.sample_every) as usize).min(last - 1);
        while idx > 0 && self.times[idx] > t {
            idx -= 1;
        }
        while idx + 1 < last && self.times[idx + 1] <= t {
            idx += 1;
        }
        idx
    }

    /// Linear interpolation between samples; constant beyond the ends.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let i = self.segment(t);
        let a = &self.states[i];
        if i + 1 >= self.states.len() || t <= self.times[i] {
            out.copy_from_slice(a);
            return;
        }
        let b = &self.states[i + 1];
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t >= t1 {
            out.copy_from_slice(b);
            return;
        }
        let w = (t - t0) / (t1 - t0);
        for ((o, x0), x1) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
            *o = x0 + w * (x1 - x0);
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.interpolate_into(t, &mut out);
        out
    }

    /// Post-transient per-coordinate amplitude: `max - min` over
    /// `t ∈ [from, horizon]`.
    pub fn amplitude(&self, from: f64) -> Vec<f64> {
        let k = self.dim();
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for (t, x) in self.times.iter().zip(&self.states) {
            if *t + 1e-12 < from {
                continue;
            }
            for i in 0..k {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h - l).collect()
    }
}

struct Rk4<'a> {
    spec: &'a ModelSpec,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        let k = spec.dim();
        Self {
            spec,
            k1: vec![0.0; k],
            k2: vec![0.0; k],
            k3: vec![0.0; k],
            k4: vec![0.0; k],
            tmp: vec![0.0; k],
            scratch: vec![0.0; k],
        }
    }

    fn step(&mut self, x: &mut [f64], h: f64) {
        let spec = self.spec;
        spec.velocity_into(x, &mut self.k1, &mut self.scratch);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        spec.velocity_into(&self.tmp, &mut self.k2, &mut self.scratch);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        spec.velocity_into(&self.tmp, &mut self.k3, &mut self.scratch);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        spec.velocity_into(&self.tmp, &mut self.k4, &mut self.scratch);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Classical fourth-order Runge–Kutta from `x0` to `horizon`.
///
/// States are recorded at every multiple of `sample_every` and at the
/// horizon. Each sample interval is covered by equal substeps no longer
/// than `step`.
pub fn integrate(
    spec: &ModelSpec,
    x0: &[f64],
    horizon: f64,
    step: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    let k = spec.dim();
    if x0.len() != k {
        return Err(Error::Input(format!("x0 has length {} for a k = {k} model", x0.len())));
    }
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Input(format!("x0 = {x0:?} is outside [0, 1]^k")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Input(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0 && step <= sample_every) {
        return Err(Error::Input(format!(
            "need 0 < step <= sample_every, got step = {step}, sample_every = {sample_every}"
        )));
    }

    let full = (horizon / sample_every).floor() as usize;
    let mut grid: Vec<f64> = (0..=full).map(|j| j as f64 * sample_every).collect();
    if horizon - grid[full] > 1e-9 * sample_every {
        grid.push(horizon);
    } else {
        grid[full] = horizon;
    }

    let mut rk = Rk4::new(spec);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(grid.len());
    states.push(DensityVector::new(x.clone()));
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let substeps = ((span / step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for _ in 0..substeps {
            rk.step(&mut x, h);
        }
        if let Some(bad) = x
            .iter()
            .find(|v| !(-EXIT_TOLERANCE..=1.0 + EXIT_TOLERANCE).contains(*v))
        {
            return Err(Error::NumericalInstability(format!(
                "state component {bad} left the unit cube at t = {}; reduce the step",
                w[1]
            )));
        }
        states.push(DensityVector::new(x.clone()));
    }
    Ok(Trajectory {
        times: grid,
        states,
        step,
        sample_every,
    })
}
