//! Fixed points, linear stability and bifurcations of `ẋ = V(x)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::model::{CyclicParams, DensityVector, ModelSpec};

/// Threshold separating stable, marginal and unstable spectra, and real
/// from complex leading eigenvalues.
pub const STABILITY_TOL: f64 = 1e-8;

/// Residual accepted by [`find_fixed_point`].
pub const FIXED_POINT_TOL: f64 = 1e-12;

const NEWTON_MAX_ITER: usize = 100;

/// Analytic Jacobian of the interior branch of `V` at `x`:
/// `∂V_i/∂x_j = α_ji [(1 - x_i) λ_i + x_i μ_i] - δ_ij (λ_i + μ_i)`.
pub fn jacobian(spec: &ModelSpec, x: &[f64]) -> SquareMatrix {
    let k = spec.dim();
    let (lambda, mu) = spec.rates(x);
    let mut jac = SquareMatrix::zeros(k);
    for i in 0..k {
        let sensitivity = (1.0 - x[i]) * lambda[i] + x[i] * mu[i];
        for j in 0..k {
            jac[(i, j)] = spec.alpha(j, i) * sensitivity;
        }
        jac[(i, i)] -= lambda[i] + mu[i];
    }
    jac
}

/// Newton iteration on `V` starting at `guess`, kept inside `(0, 1)^k`.
pub fn find_fixed_point(spec: &ModelSpec, guess: &[f64]) -> Result<DensityVector> {
    let k = spec.dim();
    if guess.len() != k || guess.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
        return Err(Error::Input(format!("guess {guess:?} must lie in (0, 1)^{k}")));
    }
    let residual = |x: &[f64]| spec.velocity(x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let project = |v: f64| v.clamp(1e-15, 1.0 - 1e-15);

    let mut x = guess.to_vec();
    let mut res = residual(&x);
    for _ in 0..NEWTON_MAX_ITER {
        if res <= FIXED_POINT_TOL {
            return Ok(DensityVector::new(x));
        }
        let v = spec.velocity(&x);
        let rhs: Vec<f64> = v.iter().map(|vi| -vi).collect();
        let dx = linalg::solve(&jacobian(spec, &x), &rhs)
            .map_err(|e| Error::NoFixedPoint(format!("Newton step failed at {x:?}: {e}")))?;
        // backtrack until the residual decreases
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, d)| project(xi + t * d)).collect();
            let trial_res = residual(&trial);
            if trial_res < res || t < 1e-6 {
                x = trial;
                res = trial_res;
                break;
            }
            t *= 0.5;
        }
    }
    if res <= FIXED_POINT_TOL {
        return Ok(DensityVector::new(x));
    }
    Err(Error::NoFixedPoint(format!(
        "Newton did not converge in {NEWTON_MAX_ITER} iterations (residual {res:.3e})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Stable,
    Marginal,
    UnstableReal,
    UnstableComplexPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub fixed_point: DensityVector,
    /// Sorted by descending real part.
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub classification: Classification,
}

fn classify(leading: Complex64) -> Classification {
    if leading.re < -STABILITY_TOL {
        Classification::Stable
    } else if leading.re.abs() <= STABILITY_TOL {
        Classification::Marginal
    } else if leading.im.abs() <= STABILITY_TOL {
        Classification::UnstableReal
    } else {
        Classification::UnstableComplexPair
    }
}

/// Linear stability of a fixed point.
pub fn stability_at(spec: &ModelSpec, x_star: &[f64]) -> Result<StabilityReport> {
    let residual = spec.velocity(x_star).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > 1e-9 {
        return Err(Error::Input(format!(
            "{x_star:?} is not a fixed point (|V| = {residual:.3e})"
        )));
    }
    let eigenvalues = linalg::eigenvalues(&jacobian(spec, x_star))?;
    let leading = eigenvalues[0];
    Ok(StabilityReport {
        fixed_point: DensityVector::new(x_star.to_vec()),
        max_real_part: leading.re,
        classification: classify(leading),
        eigenvalues,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BifurcationKind {
    Pitchfork,
    Hopf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationResult {
    #[serde(rename = "J_critical")]
    pub critical: f64,
    #[serde(rename = "type")]
    pub kind: BifurcationKind,
    pub imag_at_crossing: f64,
    pub bracket: (f64, f64),
}

/// Leading eigenvalue of the Jacobian at `(1/2, ..., 1/2)` for a cyclic
/// family at coupling `coupling`.
pub fn leading_eigenvalue_at_half(family: &CyclicParams, coupling: f64) -> Result<Complex64> {
    let spec = ModelSpec::cyclic(&family.with_coupling(coupling))?;
    let half = vec![0.5; family.k];
    Ok(linalg::eigenvalues(&jacobian(&spec, &half))?[0])
}

/// Bisects on `J` for the loss of stability of the symmetric fixed point of
/// a cyclic family until the bracket is at most `resolution` wide.
pub fn bifurcation_scan(
    family: &CyclicParams,
    range: (f64, f64),
    resolution: f64,
) -> Result<BifurcationResult> {
    family.with_coupling(range.0.max(0.0)).validate()?;
    let (mut lo, mut hi) = range;
    if !(lo < hi && lo >= 0.0 && resolution > 0.0) {
        return Err(Error::Input(format!(
            "need 0 <= J_low < J_high and a positive resolution, got {range:?}, {resolution}"
        )));
    }
    let f_lo = leading_eigenvalue_at_half(family, lo)?.re;
    let f_hi = leading_eigenvalue_at_half(family, hi)?.re;
    if f_lo.signum() == f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
        return Err(Error::Bracket { lo, hi });
    }
    let rising = f_lo < 0.0;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let f_mid = leading_eigenvalue_at_half(family, mid)?.re;
        if (f_mid < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let critical = 0.5 * (lo + hi);
    let crossing = leading_eigenvalue_at_half(family, critical)?;
    let imag = crossing.im.abs();
    Ok(BifurcationResult {
        critical,
        kind: if imag > STABILITY_TOL {
            BifurcationKind::Hopf
        } else {
            BifurcationKind::Pitchfork
        },
        imag_at_crossing: imag,
        bracket: (lo, hi),
    })
}

/// Closed-form critical coupling of the cyclic model: `2` without
/// frustration, `2 / cos(π/k)` with it.
pub fn cyclic_critical_coupling(family: &CyclicParams) -> f64 {
    if family.sign_product() > 0 {
        2.0
    } else {
        2.0 / (std::f64::consts::PI / family.k as f64).cos()
    }
}

/// Spectrum of the linearized cyclic model at `(1/2, ..., 1/2)`:
/// `J z - 2` for every `k`-th root `z` of the sign product.
pub fn cyclic_spectrum_at_half(family: &CyclicParams, coupling: f64) -> Vec<Complex64> {
    let k = family.k as f64;
    let offset = if family.sign_product() > 0 { 0.0 } else { 0.5 };
    (0..family.k)
        .map(|l| {
            let angle = 2.0 * std::f64::consts::PI * (l as f64 + offset) / k;
            Complex64::from_polar(coupling, angle) - 2.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic(signs: &[i8], j: f64) -> ModelSpec {
        ModelSpec::cyclic(&CyclicParams::new(signs.to_vec(), j)).unwrap()
    }

    fn fd_jacobian(spec: &ModelSpec, x: &[f64]) -> SquareMatrix {
        let k = spec.dim();
        let h = 1e-5;
        let mut jac = SquareMatrix::zeros(k);
        for j in 0..k {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let (vp, vm) = (spec.velocity(&plus), spec.velocity(&minus));
            for i in 0..k {
                jac[(i, j)] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn jacobian_at_half_of_cyclic() {
        let spec = cyclic(&[1, -1, 1, 1], 3.0);
        let jac = jacobian(&spec, &[0.5; 4]);
        let fd = fd_jacobian(&spec, &[0.5; 4]);
        let signs = [1.0, -1.0, 1.0, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j {
                    -2.0
                } else if j == (i + 1) % 4 {
                    signs[i] * 3.0
                } else {
                    0.0
                };
                assert!((jac[(i, j)] - expect).abs() < 1e-14);
                assert!((fd[(i, j)] - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_of_constant_unit_rates() {
        let spec = ModelSpec::mean_field(&vec![vec![0.0; 3]; 3], &[0.0; 3]).unwrap();
        assert_eq!(jacobian(&spec, &[0.2, 0.9, 0.4]), {
            let mut m = SquareMatrix::identity(3);
            for i in 0..3 {
                m[(i, i)] = -2.0;
            }
            m
        });
    }

    #[test]
    fn antiferro_spectrum_from_characteristic_polynomial() {
        // det(A - zI) = (-2 - z)^3 + (-4)^3 for A = -2I - 4P
        let jac = jacobian(&cyclic(&[-1, -1, -1], 4.0), &[0.5; 3]);
        let ev = linalg::eigenvalues(&jac).unwrap();
        for z in &ev {
            let p = (-2.0 - z).powi(3) + Complex64::new(-64.0, 0.0);
            assert!(p.norm() < 1e-8);
        }
        let expect = [
            Complex64::new(0.0, 2.0 * 3f64.sqrt()),
            Complex64::new(0.0, -2.0 * 3f64.sqrt()),
            Complex64::new(-6.0, 0.0),
        ];
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn ferro_zero_eigenvalue_at_two() {
        let ev = linalg::eigenvalues(&jacobian(&cyclic(&[1, 1, 1], 2.0), &[0.5; 3])).unwrap();
        assert!(ev[0].norm() < 1e-12);
    }

    /// Bisection for the symmetric fixed point of the ferromagnetic cycle:
    /// `e^u - x (e^u + e^{-u}) = 0` with `u = J (x - 1/2)`.
    fn symmetric_root(j: f64, mut lo: f64, mut hi: f64) -> f64 {
        let f = |x: f64| {
            let u = j * (x - 0.5);
            u.exp() - x * (u.exp() + (-u).exp())
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fixed_points() {
        let spec = cyclic(&[-1, 1, -1], 2.5);
        assert_eq!(find_fixed_point(&spec, &[0.5; 3]).unwrap().0, vec![0.5; 3]);

        let spec = cyclic(&[1, 1, 1], 3.0);
        let x = find_fixed_point(&spec, &[0.9; 3]).unwrap();
        let oracle = symmetric_root(3.0, 0.6, 0.999);
        for v in x.iter() {
            assert!((v - oracle).abs() < 1e-10 && *v > 0.5);
        }
        let low = find_fixed_point(&spec, &[0.1; 3]).unwrap();
        assert!(low.iter().all(|v| (v - (1.0 - oracle)).abs() < 1e-10));
        for p in [&x, &low] {
            let report = stability_at(&spec, p).unwrap();
            assert_eq!(report.classification, Classification::Stable);
        }
        let report = stability_at(&spec, &[0.5; 3]).unwrap();
        assert_eq!(report.classification, Classification::UnstableReal);

        // (1 - x) 2 = x / 2
        let spec = ModelSpec::mean_field(&vec![vec![0.0; 2]; 2], &[2f64.ln(); 2]).unwrap();
        let x = find_fixed_point(&spec, &[0.3, 0.6]).unwrap();
        let bisect = {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if 2.0 * (1.0 - mid) - 0.5 * mid > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        assert!((bisect - 0.8).abs() < 1e-12);
        assert!(x.iter().all(|v| (v - bisect).abs() < 1e-12));
    }

    #[test]
    fn fixed_point_rejects_outside_guess() {
        assert!(find_fixed_point(&cyclic(&[1, 1, 1], 1.0), &[0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn stability_examples() {
        let r = stability_at(&cyclic(&[-1, -1, -1], 3.9), &[0.5; 3]).unwrap();
        assert_eq!(r.classification, Classification::Stable);
        assert!((r.max_real_part - (-0.05)).abs() < 1e-10);

        let r = stability_at(&cyclic(&[-1, -1, -1], 4.1), &[0.5; 3]).unwrap();
        assert_eq!(r.classification, Classification::UnstableComplexPair);
        assert!((r.max_real_part - 0.05).abs() < 1e-10);
        assert!((r.eigenvalues[0].im.abs() - 4.1 * 3f64.sqrt() / 2.0).abs() < 1e-9);

        let r = stability_at(&cyclic(&[-1, 1, 1, 1], 0.5), &[0.5; 4]).unwrap();
        assert_eq!(r.classification, Classification::Stable);

        let r = stability_at(&cyclic(&[1, 1, 1], 2.0), &[0.5; 3]).unwrap();
        assert_eq!(r.classification, Classification::Marginal);

        assert!(stability_at(&cyclic(&[1, 1, 1], 2.0), &[0.3; 3]).is_err());
    }

    #[test]
    fn scans() {
        let r = bifurcation_scan(&CyclicParams::new(vec![1, 1, 1], 0.0), (1.0, 3.0), 1e-3).unwrap();
        assert!((r.critical - 2.0).abs() <= 1e-3);
        assert_eq!(r.kind, BifurcationKind::Pitchfork);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-3);
        assert!(r.bracket.0 < r.critical && r.critical < r.bracket.1);

        let r = bifurcation_scan(&CyclicParams::new(vec![-1, -1, -1], 0.0), (3.0, 5.0), 1e-3).unwrap();
        assert!((r.critical - 4.0).abs() <= 1e-3);
        assert_eq!(r.kind, BifurcationKind::Hopf);

        let r = bifurcation_scan(&CyclicParams::new(vec![1, -1, 1, 1, 1], 0.0), (2.0, 3.0), 1e-3)
            .unwrap();
        let closed = 2.0 / (std::f64::consts::PI / 5.0).cos();
        assert!((closed - 2.4721).abs() < 1e-4);
        assert!((r.critical - closed).abs() <= 1e-3);
        assert_eq!(r.kind, BifurcationKind::Hopf);

        assert!(matches!(
            bifurcation_scan(&CyclicParams::new(vec![1, 1, 1], 0.0), (0.5, 1.5), 1e-3),
            Err(Error::Bracket { .. })
        ));
    }
}
