//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use spinflow::coupling::{simulate_auxiliary, InitMode};
use spinflow::linalg::eigenvalues;
use spinflow::rng::splitmix64;
use spinflow::stability::cyclic_spectrum_at_half;
use spinflow::stats::{binomial_marginal_test, ks_critical_two_sample, ks_two_sample};
use spinflow::{
    bifurcation_scan, integrate, jacobian, rescaling_consistency, simulate_coupled, simulate_spin_system,
    BifurcationKind, CyclicParams, ModelSpec, RngStream, SpinMode,
};
use spinflow_cli::config::ExperimentConfig;
use spinflow_cli::studies::run_convergence_study;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cyclic(signs: Vec<i8>, j: f64) -> ModelSpec {
    ModelSpec::cyclic(&CyclicParams::new(signs, j)).unwrap()
}

const CONVERGE_CONFIG: &str = r#"{
    "model": {"cyclic": {"k": 3, "signs": [1, 1, 1], "J": 1.0}},
    "x0": [0.6, 0.4, 0.5], "T": 5, "N_grid": [100, 400, 1600, 6400],
    "replicas": 32, "epsilon": 0.2, "master_seed": 20240611}"#;

fn pitchfork() -> Outcome {
    let r = bifurcation_scan(&CyclicParams::new(vec![1, 1, 1], 1.0), (1.0, 3.0), 1e-3).map_err(|e| e.to_string())?;
    ensure(
        (r.critical - 2.0).abs() <= 1e-3 && r.kind == BifurcationKind::Pitchfork && r.imag_at_crossing == 0.0,
        format!("J_c = {:.5}, imag = {:e}", r.critical, r.imag_at_crossing),
    )
}

fn hopf() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut signs_list: Vec<Vec<i8>> = [3usize, 4, 5, 8]
        .iter()
        .map(|&k| {
            let mut s = vec![1i8; k];
            s[0] = -1;
            s
        })
        .collect();
    signs_list.push(vec![-1, -1, -1]);
    for signs in signs_list {
        let k = signs.len();
        let expected = 2.0 / (std::f64::consts::PI / k as f64).cos();
        let r = bifurcation_scan(&CyclicParams::new(signs, 1.0), (2.01, 6.0), 1e-3).map_err(|e| e.to_string())?;
        ok &= (r.critical - expected).abs() <= 1e-3 && r.kind == BifurcationKind::Hopf && r.imag_at_crossing > 0.0;
        parts.push(format!("k={k}: {:.4} (expected {expected:.4})", r.critical));
    }
    ensure(ok, parts.join(", "))
}

/// Greedy multiset match; both sides are well separated for these cases.
fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut pool = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (idx, d) = pool
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(idx);
    }
    worst
}

fn spectrum() -> Outcome {
    let mut worst = 0.0f64;
    let mut corrected = 0;
    for k in 3..=8usize {
        for &j in &[0.5, 1.0, 2.0, 4.0] {
            for product in [1i8, -1] {
                let mut signs = vec![1i8; k];
                signs[0] = product;
                let family = CyclicParams::new(signs, j);
                let spec = ModelSpec::cyclic(&family).map_err(|e| e.to_string())?;
                let eig = eigenvalues(&jacobian(&spec, &vec![0.5; k])).map_err(|e| e.to_string())?;
                // s J e^{2πil/k} - 2 holds as written when s = 1 or k is odd;
                // for s = -1 and even k the eigenvalues are J z - 2 with z^k = -1
                let expected: Vec<Complex64> = if product == 1 || k % 2 == 1 {
                    (0..k)
                        .map(|l| {
                            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / k as f64);
                            f64::from(product) * j * z - 2.0
                        })
                        .collect()
                } else {
                    corrected += 1;
                    cyclic_spectrum_at_half(&family, j)
                };
                worst = worst.max(multiset_distance(&eig, &expected));
            }
        }
    }
    ensure(
        worst <= 1e-8,
        format!("max deviation {worst:.2e} over 48 cases ({corrected} frustrated even-k cases use z^k = -1)"),
    )
}

fn convergence() -> Outcome {
    let config = ExperimentConfig::from_json(CONVERGE_CONFIG).map_err(|e| e.to_string())?;
    let (_, summary) = run_convergence_study(&config).map_err(|e| e.to_string())?;
    let fit = summary.fit.ok_or("no fit")?;
    let last = summary.rows.last().unwrap();
    let medians: Vec<String> = summary.rows.iter().map(|r| format!("{:.4}", r.median_sup_dist)).collect();
    ensure(
        (-0.65..=-0.35).contains(&fit.slope) && last.exceed_fraction == 0.0,
        format!(
            "slope {:.3}, medians [{}], exceedance at N=6400 {} (max {:.4} vs {:.4})",
            fit.slope,
            medians.join(", "),
            last.exceed_fraction,
            last.max_sup_dist,
            last.threshold
        ),
    )
}

fn coupling_inequality() -> Outcome {
    let spec = cyclic(vec![1, 1, 1], 1.0);
    let x0 = [0.6, 0.4, 0.5];
    let jobs: Vec<(u32, u64)> = [100u32, 400, 1600].iter().flat_map(|&n| (0..40).map(move |r| (n, r))).collect();
    let trajs: Vec<_> = [100u32, 400, 1600]
        .iter()
        .map(|&n| {
            let (x, _) = spinflow::jump::round_to_grid(&x0, n);
            (n, integrate(&spec, &x, 5.0, 1e-3, 1e-3).unwrap())
        })
        .collect();
    let results: Vec<Result<(usize, bool), String>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let (x, _) = spinflow::jump::round_to_grid(&x0, n);
            let traj = &trajs.iter().find(|t| t.0 == n).unwrap().1;
            let run = simulate_coupled(&spec, traj, &x, n, 5.0, RngStream::for_replica(101, n.into(), r))
                .map_err(|e| e.to_string())?;
            let checked = run.check_coupling_inequality().map_err(|v| format!("N={n} r={r}: {v}"))?;
            Ok((checked, run.lockstep_holds()))
        })
        .collect();
    let mut times = 0;
    for r in &results {
        let (checked, lockstep) = r.clone()?;
        if !lockstep {
            return Err("lockstep property failed".into());
        }
        times += checked;
    }
    Ok(format!("{} runs, {times} event times checked", results.len()))
}

fn binomial_marginals() -> Outcome {
    let spec = cyclic(vec![1, 1, 1], 1.0);
    let x0 = [0.6, 0.4, 0.5];
    let (n, horizon, reps) = (1000u32, 5.0, 2000u64);
    let traj = integrate(&spec, &x0, horizon, 1e-3, 1e-3).map_err(|e| e.to_string())?;
    let paths: Vec<_> = (0..reps)
        .into_par_iter()
        .map(|r| {
            simulate_auxiliary(&spec, &traj, &x0, n, horizon, RngStream::for_replica(202, n.into(), r), InitMode::Binomial)
                .map(|a| a.path)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut worst = (0.0f64, 1.0f64);
    for t in [0.0, horizon / 2.0, horizon] {
        let p = traj.at(t);
        let counts: Vec<Vec<u32>> = paths.iter().map(|path| path.counts_at(t)).collect();
        for i in 0..3 {
            let samples: Vec<u64> = counts.iter().map(|c| u64::from(c[i])).collect();
            let (z, ratio) = binomial_marginal_test(&samples, u64::from(n), p[i]).map_err(|e| e.to_string())?;
            ok &= z.abs() < 3.0 && (0.8..=1.2).contains(&ratio);
            worst.0 = worst.0.max(z.abs());
            if (ratio - 1.0).abs() > (worst.1 - 1.0).abs() {
                worst.1 = ratio;
            }
        }
    }
    ensure(ok, format!("max |z| {:.2}, most extreme variance ratio {:.3}", worst.0, worst.1))
}

fn micro_meso() -> Outcome {
    let spec = cyclic(vec![1, 1, 1], 2.0);
    let x0 = [0.6, 0.4, 0.5];
    let terminal = |mode: SpinMode, seed: u64| -> Result<Vec<f64>, String> {
        (0..500u64)
            .into_par_iter()
            .map(|r| {
                simulate_spin_system(&spec, &x0, 100, 2.0, RngStream::for_replica(seed, 100, r), mode)
                    .map(|p| p.terminal_state()[0])
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let full = terminal(SpinMode::Full, 303)?;
    let aggregated = terminal(SpinMode::Aggregated, 304)?;
    let d = ks_two_sample(&full, &aggregated);
    let crit = ks_critical_two_sample(500, 500, 0.01);
    ensure(d < crit, format!("KS {d:.4} vs critical {crit:.4}"))
}

fn rescaling() -> Outcome {
    let spec = cyclic(vec![1, -1, 1], 1.5);
    let x0 = [0.6, 0.4, 0.5];
    let failing: Vec<u64> = (0..20u64)
        .filter(|&s| !rescaling_consistency(&spec, &x0, 200, 2.0, RngStream::new(splitmix64(s), 0)).unwrap_or(false))
        .collect();
    ensure(failing.is_empty(), format!("20 seeds, {} mismatches", failing.len()))
}

fn uniform(state: &mut u64) -> f64 {
    *state = splitmix64(*state);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

fn flow_invariance() -> Outcome {
    let mut state = 909u64;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = 3 + (uniform(&mut state) * 6.0) as usize;
        let signs: Vec<i8> = (0..k).map(|_| if uniform(&mut state) < 0.5 { -1 } else { 1 }).collect();
        let j = 8.0 * uniform(&mut state);
        let x0: Vec<f64> = (0..k).map(|_| uniform(&mut state)).collect();
        let traj = integrate(&cyclic(signs, j), &x0, 50.0, 1e-3, 1e-2).map_err(|e| e.to_string())?;
        for s in &traj.states {
            for v in &s.0 {
                worst = worst.max(-v).max(v - 1.0);
            }
        }
    }
    ensure(worst <= 1e-9, format!("100 configurations, largest excursion {worst:.2e}"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("converge.json");
    std::fs::write(&cfg, CONVERGE_CONFIG).map_err(|e| e.to_string())?;
    let run = |name: &str, threads: &str| -> Result<Vec<u8>, String> {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_spinflow"))
            .args(["converge", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()])
            .env("THREADS", threads)
            .stderr(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("converge exited with {status}"));
        }
        std::fs::read(Path::new(&dir).join("ensemble.csv")).map_err(|e| e.to_string())
    };
    let first = run("a", "4")?;
    let second = run("b", "2")?;
    ensure(first == second, format!("{} bytes, identical: {}", first.len(), first == second))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("pitchfork critical value", pitchfork, Duration::from_secs(1)),
        ("hopf critical values", hopf, Duration::from_secs(5)),
        ("linearized spectrum", spectrum, Duration::from_secs(1)),
        ("convergence rate", convergence, Duration::from_secs(600)),
        ("coupling inequality", coupling_inequality, Duration::from_secs(120)),
        ("binomial marginals", binomial_marginals, Duration::from_secs(180)),
        ("full spin vs density profile", micro_meso, Duration::from_secs(120)),
        ("time rescaling identity", rescaling, Duration::from_secs(10)),
        ("ode flow invariance", flow_invariance, Duration::from_secs(30)),
        ("determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} {:>2} {name}: {detail} [{:.2}s]", i + 1, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
