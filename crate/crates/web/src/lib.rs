//! Browser bindings for the cyclic model. Every export returns a flat
//! `Float64Array` of fixed-width rows so the page can draw without parsing.

use spinflow::jump::round_to_grid;
use spinflow::stability::leading_eigenvalue_at_half;
use spinflow::{bifurcation_scan, integrate, simulate_density_profile, CyclicParams, ModelSpec, RngStream};
use wasm_bindgen::prelude::*;

const STEP: f64 = 1e-3;
/// Largest N the page may request; keeps one path well under a second.
pub const MAX_N: u32 = 20_000;

fn family(signs: &[i8], coupling: f64) -> Result<CyclicParams, String> {
    let family = CyclicParams::new(signs.to_vec(), coupling);
    family.validate().map_err(|e| e.to_string())?;
    Ok(family)
}

fn spec(signs: &[i8], coupling: f64) -> Result<ModelSpec, String> {
    ModelSpec::cyclic(&family(signs, coupling)?).map_err(|e| e.to_string())
}

fn sample_every(horizon: f64, samples: u32) -> f64 {
    (horizon / f64::from(samples.max(1))).max(STEP)
}

/// Rows `t, x_1, ..., x_k` of the ODE solution.
pub fn ode_rows(signs: &[i8], coupling: f64, x0: &[f64], horizon: f64, samples: u32) -> Result<Vec<f64>, String> {
    let spec = spec(signs, coupling)?;
    let traj = integrate(&spec, x0, horizon, STEP, sample_every(horizon, samples)).map_err(|e| e.to_string())?;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .flat_map(|(t, x)| std::iter::once(*t).chain(x.0.iter().copied()))
        .collect())
}

/// Rows `J, re, im` of the leading eigenvalue at the symmetric point.
pub fn eigen_rows(signs: &[i8], j_low: f64, j_high: f64, points: u32) -> Result<Vec<f64>, String> {
    let family = family(signs, j_low.max(0.0))?;
    if !(j_low >= 0.0 && j_high > j_low && points >= 2) {
        return Err(format!("need 0 <= J_low < J_high and at least 2 points, got {j_low}, {j_high}, {points}"));
    }
    let mut out = Vec::with_capacity(3 * points as usize);
    for p in 0..points {
        let j = j_low + (j_high - j_low) * f64::from(p) / f64::from(points - 1);
        let z = leading_eigenvalue_at_half(&family, j).map_err(|e| e.to_string())?;
        out.extend([j, z.re, z.im.abs()]);
    }
    Ok(out)
}

/// `[J_c, 1 if Hopf else 0]`, or an error if the range does not bracket it.
pub fn critical(signs: &[i8], j_low: f64, j_high: f64) -> Result<Vec<f64>, String> {
    let r = bifurcation_scan(&family(signs, 1.0)?, (j_low, j_high), 1e-4).map_err(|e| e.to_string())?;
    let hopf = matches!(r.kind, spinflow::BifurcationKind::Hopf);
    Ok(vec![r.critical, if hopf { 1.0 } else { 0.0 }])
}

/// One jump path sampled on the ODE grid: rows `t, m_1, ..., m_k`. `x0` is
/// rounded to the `1/N` grid first.
pub fn jump_rows(
    signs: &[i8],
    coupling: f64,
    x0: &[f64],
    n: u32,
    horizon: f64,
    seed: u64,
    samples: u32,
) -> Result<Vec<f64>, String> {
    if !(1..=MAX_N).contains(&n) {
        return Err(format!("N must lie in 1..={MAX_N}, got {n}"));
    }
    let spec = spec(signs, coupling)?;
    let (x0, _) = round_to_grid(x0, n);
    let path = simulate_density_profile(&spec, &x0, n, horizon, RngStream::for_replica(seed, n.into(), 0))
        .map_err(|e| e.to_string())?;
    let dt = sample_every(horizon, samples);
    let steps = (horizon / dt).round() as u32;
    let k = path.dim();
    let mut counts = path.initial_counts.clone();
    let mut events = path.events.iter().peekable();
    let mut out = Vec::with_capacity((steps as usize + 1) * (k + 1));
    for s in 0..=steps {
        let t = (f64::from(s) * dt).min(horizon);
        while let Some(e) = events.next_if(|e| e.time <= t) {
            let c = &mut counts[e.type_index as usize];
            *c = if e.direction > 0 { *c + 1 } else { *c - 1 };
        }
        out.push(t);
        out.extend(counts.iter().map(|c| f64::from(*c) / f64::from(n)));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn ode_trajectory(signs: Vec<i8>, coupling: f64, x0: Vec<f64>, horizon: f64, samples: u32) -> Result<Vec<f64>, JsError> {
    ode_rows(&signs, coupling, &x0, horizon, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn eigenvalue_scan(signs: Vec<i8>, j_low: f64, j_high: f64, points: u32) -> Result<Vec<f64>, JsError> {
    eigen_rows(&signs, j_low, j_high, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn critical_coupling(signs: Vec<i8>, j_low: f64, j_high: f64) -> Result<Vec<f64>, JsError> {
    critical(&signs, j_low, j_high).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn jump_path(
    signs: Vec<i8>,
    coupling: f64,
    x0: Vec<f64>,
    n: u32,
    horizon: f64,
    seed: u64,
    samples: u32,
) -> Result<Vec<f64>, JsError> {
    jump_rows(&signs, coupling, &x0, n, horizon, seed, samples).map_err(|e| JsError::new(&e))
}
