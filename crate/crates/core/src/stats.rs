//! Summary statistics and goodness-of-fit checks used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic coefficient `c(α) = sqrt(-ln(α/2) / 2)`.
fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Critical value of the two-sample statistic at level `alpha`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// One-sample statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Standardized mean deviation and variance ratio of `Bin(N, p)` samples:
/// `z = (mean - Np) / (sqrt(Np(1-p)) / sqrt(R))` and
/// `sample variance / (Np(1-p))`.
pub fn binomial_marginal_test(samples: &[u64], n: u64, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Input(format!("binomial parameter p = {p} must lie in (0, 1)")));
    }
    if samples.len() < 200 {
        return Err(Error::Input(format!(
            "need at least 200 samples, got {}",
            samples.len()
        )));
    }
    let xs: Vec<f64> = samples.iter().map(|s| *s as f64).collect();
    let r = xs.len() as f64;
    let nf = n as f64;
    let target_var = nf * p * (1.0 - p);
    let z = (mean(&xs) - nf * p) / (target_var.sqrt() / r.sqrt());
    Ok((z, variance(&xs) / target_var))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

/// Ordinary least squares `y = slope x + intercept`; `None` with fewer
/// than three points.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    let stderr = (sse / (n as f64 - 2.0) / sxx).sqrt();
    Some(LinearFit {
        slope,
        intercept,
        stderr,
    })
}

/// Least squares fit of `ln y` against `ln x`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Binomial, Distribution};

    #[test]
    fn exact_expectation_gives_zero_z() {
        let (z, ratio) = binomial_marginal_test(&[300; 200], 1000, 0.3).unwrap();
        assert_eq!(z, 0.0);
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn direct_binomial_sampler_passes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let bin = Binomial::new(1000, 0.3).unwrap();
        let samples: Vec<u64> = (0..2000).map(|_| bin.sample(&mut rng)).collect();
        let (z, ratio) = binomial_marginal_test(&samples, 1000, 0.3).unwrap();
        assert!(z.abs() < 3.0, "{z}");
        assert!((0.8..=1.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(binomial_marginal_test(&[0; 300], 10, 0.0).is_err());
        assert!(binomial_marginal_test(&[10; 300], 10, 1.0).is_err());
        assert!(binomial_marginal_test(&[5; 100], 10, 0.5).is_err());
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
        assert!((ks_critical_two_sample(500, 500, 0.01) - 1.6276 * (2.0f64 / 500.0).sqrt()).abs() < 1e-4);
        let uniform: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&uniform, |x| x) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn fits() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        let fit = log_log_fit(&[100.0, 400.0, 1600.0], &[0.1, 0.05, 0.025]).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]).is_none());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
