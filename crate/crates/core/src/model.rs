//! Rate models for type-dependent mean-field spin-flip systems.
//!
//! A [`ModelSpec`] fixes the activation rates `λ_i(x)` and deactivation
//! rates `μ_i(x)` of each of the `k` spin types as functions of the density
//! vector `x`. Two families are supported:
//!
//! * mean-field exponential rates `λ_i(x) = exp(Σ_j α[j][i] x_j + a_i)`,
//!   `μ_i(x) = exp(-Σ_j α[j][i] x_j - a_i)`, where `α[j][i]` is the influence
//!   of type `j` on type `i` and `a_i` an external field;
//! * state-independent (tabulated) rates `λ_i, μ_i` given as constants.
//!
//! The clamped birth and death rates `f`, `g` extend `(1 - x_i) λ_i` and
//! `x_i μ_i` outside the unit cube so that the density-profile process can
//! never leave `[0, 1]^k`.
//!
//! The literal Hamiltonian form of the spin rates, `exp(-ΔH)` with spins in
//! `{-1, +1}`, is the mean-field family under the affine reparametrization
//! `α → 2α`, `a_i → a_i - Σ_j α[j][i]` (up to an `O(1/N)` self-interaction
//! term); see [`ModelSpec::from_hamiltonian`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible absolute exponent on `[0, 1]^k`.
pub const MAX_EXPONENT: f64 = 700.0;

/// A point of `R^k` read as per-type densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityVector(pub Vec<f64>);

impl DensityVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    /// The constant vector `(value, ..., value)`.
    pub fn uniform(k: usize, value: f64) -> Self {
        Self(vec![value; k])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for DensityVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for DensityVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DensityVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Parameters of the cyclic-interaction model: type `i` is influenced only
/// by its successor `c(i) = i + 1 (mod k)` with sign `signs[i]` and strength
/// `coupling`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicParams {
    pub k: usize,
    pub signs: Vec<i8>,
    #[serde(rename = "J")]
    pub coupling: f64,
}

impl CyclicParams {
    pub fn new(signs: Vec<i8>, coupling: f64) -> Self {
        Self {
            k: signs.len(),
            signs,
            coupling,
        }
    }

    /// Product of the signs; `-1` marks a frustrated cycle.
    pub fn sign_product(&self) -> i8 {
        self.signs.iter().product()
    }

    /// Zero-based counter-clockwise successor of type `i`.
    pub fn successor(&self, i: usize) -> usize {
        (i + 1) % self.k
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self {
            coupling,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::Config(format!(
                "cyclic model needs k >= 3, got {}",
                self.k
            )));
        }
        if self.signs.len() != self.k {
            return Err(Error::Config(format!(
                "cyclic model has k = {} but {} signs",
                self.k,
                self.signs.len()
            )));
        }
        if let Some(s) = self.signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Config(format!("sign {s} is not +1 or -1")));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::Config(format!(
                "coupling J must be a nonnegative finite number, got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Rates {
    /// `alpha[j * k + i]` is the influence of type `j` on type `i`.
    MeanField { alpha: Vec<f64>, a: Vec<f64> },
    Constant { lambda: Vec<f64>, mu: Vec<f64> },
}

/// An immutable rate model of dimension `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    k: usize,
    rates: Rates,
    cyclic: Option<CyclicParams>,
}

/// Bounds used by the thinning samplers and the convergence analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBound {
    /// Upper bound on the Lipschitz constant of `λ` and `μ` on `[0,1]^k`
    /// (sup-norm in `x`, per-component).
    pub constant: f64,
    /// `d = Σ_i (sup λ_i + sup μ_i)`, the total flip-rate bound per site.
    pub envelope: f64,
}

impl ModelSpec {
    /// Mean-field exponential rates. `alpha[j][i]` is the influence of type
    /// `j` on type `i`.
    pub fn mean_field(alpha: &[Vec<f64>], a: &[f64]) -> Result<Self> {
        let k = a.len();
        if k == 0 {
            return Err(Error::Config("model dimension must be at least 1".into()));
        }
        if alpha.len() != k || alpha.iter().any(|row| row.len() != k) {
            return Err(Error::Config(format!(
                "alpha must be {k}x{k} to match a field vector of length {k}"
            )));
        }
        let flat: Vec<f64> = alpha.iter().flatten().copied().collect();
        if flat.iter().chain(a).any(|v| !v.is_finite()) {
            return Err(Error::Config("alpha and a must be finite".into()));
        }
        for i in 0..k {
            let bound: f64 = (0..k).map(|j| flat[j * k + i].abs()).sum::<f64>() + a[i].abs();
            if bound > MAX_EXPONENT {
                return Err(Error::Config(format!(
                    "rate exponent of type {} can reach {bound:.1}, above {MAX_EXPONENT}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            k,
            rates: Rates::MeanField {
                alpha: flat,
                a: a.to_vec(),
            },
            cyclic: None,
        })
    }

    /// The cyclic-interaction model with `a_i = -s_i J / 2`, so that
    /// `λ_i(x) = exp(s_i J (x_{c(i)} - 1/2))`.
    pub fn cyclic(params: &CyclicParams) -> Result<Self> {
        params.validate()?;
        let k = params.k;
        let j = params.coupling;
        let mut alpha = vec![vec![0.0; k]; k];
        let mut a = vec![0.0; k];
        for i in 0..k {
            let s = f64::from(params.signs[i]);
            alpha[params.successor(i)][i] = s * j;
            a[i] = -s * j / 2.0;
        }
        let mut spec = Self::mean_field(&alpha, &a)?;
        spec.cyclic = Some(params.clone());
        Ok(spec)
    }

    /// State-independent rates.
    pub fn constant(lambda: &[f64], mu: &[f64]) -> Result<Self> {
        let k = lambda.len();
        if k == 0 || mu.len() != k {
            return Err(Error::Config(format!(
                "constant rates need matching nonempty lambda/mu, got {} and {}",
                lambda.len(),
                mu.len()
            )));
        }
        if lambda.iter().chain(mu).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("constant rates must be finite and >= 0".into()));
        }
        Ok(Self {
            k,
            rates: Rates::Constant {
                lambda: lambda.to_vec(),
                mu: mu.to_vec(),
            },
            cyclic: None,
        })
    }

    /// Mean-field model whose rates are the literal `exp(-ΔH)` spin rates
    /// with spins in `{-1, +1}`, dropping the `O(1/N)` self-interaction.
    ///
    /// Flipping a type-`i` spin up changes `H_i` by
    /// `-(Σ_{j≠i} α_ji (2m_j - 1) + 2 α_ii (2m_i - 1) + a_i) + O(1/N)`; the
    /// diagonal counts twice because the flipped spin also enters the
    /// magnetization seen by every other type-`i` site.
    pub fn from_hamiltonian(alpha: &[Vec<f64>], a: &[f64]) -> Result<Self> {
        let k = a.len();
        if alpha.len() != k || alpha.iter().any(|row| row.len() != k) {
            return Err(Error::Config(format!("alpha must be {k}x{k}")));
        }
        let weight = |j: usize, i: usize| if i == j { 2.0 } else { 1.0 };
        let effective: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..k).map(|i| 2.0 * weight(j, i) * alpha[j][i]).collect())
            .collect();
        let shifted: Vec<f64> = (0..k)
            .map(|i| a[i] - (0..k).map(|j| weight(j, i) * alpha[j][i]).sum::<f64>())
            .collect();
        Self::mean_field(&effective, &shifted)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// The cyclic parameters this spec was built from, if any.
    pub fn cyclic_params(&self) -> Option<&CyclicParams> {
        self.cyclic.as_ref()
    }

    /// Interaction strength of type `j` on type `i` (zero for constant rates).
    pub fn alpha(&self, j: usize, i: usize) -> f64 {
        match &self.rates {
            Rates::MeanField { alpha, .. } => alpha[j * self.k + i],
            Rates::Constant { .. } => 0.0,
        }
    }

    pub fn field(&self, i: usize) -> f64 {
        match &self.rates {
            Rates::MeanField { a, .. } => a[i],
            Rates::Constant { .. } => 0.0,
        }
    }

    /// `true` when the rates do not depend on the state.
    pub fn is_constant(&self) -> bool {
        matches!(self.rates, Rates::Constant { .. })
    }

    fn exponent(&self, alpha: &[f64], a: &[f64], x: &[f64], i: usize) -> f64 {
        let k = self.k;
        let mut h = a[i];
        for (j, xj) in x.iter().enumerate() {
            h += alpha[j * k + i] * xj;
        }
        h
    }

    /// `λ_i(x)`.
    pub fn lambda_i(&self, x: &[f64], i: usize) -> f64 {
        match &self.rates {
            Rates::MeanField { alpha, a } => self.exponent(alpha, a, x, i).exp(),
            Rates::Constant { lambda, .. } => lambda[i],
        }
    }

    /// `μ_i(x)`.
    pub fn mu_i(&self, x: &[f64], i: usize) -> f64 {
        match &self.rates {
            Rates::MeanField { alpha, a } => (-self.exponent(alpha, a, x, i)).exp(),
            Rates::Constant { mu, .. } => mu[i],
        }
    }

    /// Writes `λ(x)` and `μ(x)` into the given buffers.
    pub fn rates_into(&self, x: &[f64], lambda: &mut [f64], mu: &mut [f64]) {
        debug_assert_eq!(x.len(), self.k);
        match &self.rates {
            Rates::MeanField { alpha, a } => {
                for i in 0..self.k {
                    let h = self.exponent(alpha, a, x, i);
                    lambda[i] = h.exp();
                    mu[i] = (-h).exp();
                }
            }
            Rates::Constant { lambda: l, mu: m } => {
                lambda.copy_from_slice(l);
                mu.copy_from_slice(m);
            }
        }
    }

    pub fn rates(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut lambda = vec![0.0; self.k];
        let mut mu = vec![0.0; self.k];
        self.rates_into(x, &mut lambda, &mut mu);
        (lambda, mu)
    }

    /// `λ_i` at `x` with the `i`-th coordinate replaced by `value`.
    fn lambda_i_at(&self, x: &[f64], i: usize, value: f64) -> f64 {
        match &self.rates {
            Rates::MeanField { alpha, a } => {
                let h = self.exponent(alpha, a, x, i) + alpha[i * self.k + i] * (value - x[i]);
                h.exp()
            }
            Rates::Constant { lambda, .. } => lambda[i],
        }
    }

    fn mu_i_at(&self, x: &[f64], i: usize, value: f64) -> f64 {
        match &self.rates {
            Rates::MeanField { alpha, a } => {
                let h = self.exponent(alpha, a, x, i) + alpha[i * self.k + i] * (value - x[i]);
                (-h).exp()
            }
            Rates::Constant { mu, .. } => mu[i],
        }
    }

    /// Clamped birth rate `f_i(x)`.
    pub fn f_i(&self, x: &[f64], i: usize) -> f64 {
        let xi = x[i];
        if xi >= 1.0 {
            0.0
        } else if xi <= 0.0 {
            self.lambda_i_at(x, i, 0.0)
        } else {
            (1.0 - xi) * self.lambda_i(x, i)
        }
    }

    /// Clamped death rate `g_i(x)`.
    pub fn g_i(&self, x: &[f64], i: usize) -> f64 {
        let xi = x[i];
        if xi <= 0.0 {
            0.0
        } else if xi >= 1.0 {
            self.mu_i_at(x, i, 1.0)
        } else {
            xi * self.mu_i(x, i)
        }
    }

    /// Writes the clamped rates `f(x)`, `g(x)` into the given buffers.
    pub fn f_g_into(&self, x: &[f64], f: &mut [f64], g: &mut [f64]) {
        debug_assert_eq!(x.len(), self.k);
        let interior = x.iter().all(|v| (0.0..=1.0).contains(v));
        if interior {
            // f and g reuse the temporary buffers as λ and μ.
            self.rates_into(x, f, g);
            for i in 0..self.k {
                let xi = x[i];
                f[i] = if xi >= 1.0 { 0.0 } else { (1.0 - xi) * f[i] };
                g[i] = if xi <= 0.0 { 0.0 } else { xi * g[i] };
            }
        } else {
            for i in 0..self.k {
                f[i] = self.f_i(x, i);
                g[i] = self.g_i(x, i);
            }
        }
    }

    /// Clamped rates `(f(x), g(x))`, both componentwise nonnegative.
    pub fn eval_f_g(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut f = vec![0.0; self.k];
        let mut g = vec![0.0; self.k];
        self.f_g_into(x, &mut f, &mut g);
        (f, g)
    }

    pub fn velocity_into(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.f_g_into(x, out, scratch);
        for (v, g) in out.iter_mut().zip(scratch.iter()) {
            *v -= *g;
        }
    }

    /// Velocity field `V(x) = f(x) - g(x)`.
    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        let (mut f, g) = self.eval_f_g(x);
        for (v, gi) in f.iter_mut().zip(&g) {
            *v -= gi;
        }
        f
    }

    /// Per-type suprema of `λ_i` and `μ_i` over `[0, 1]^k`.
    pub fn rate_suprema(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.rates {
            Rates::MeanField { alpha, a } => {
                let k = self.k;
                let mut sup_l = Vec::with_capacity(k);
                let mut sup_m = Vec::with_capacity(k);
                for i in 0..k {
                    let col = (0..k).map(|j| alpha[j * k + i]);
                    let hi: f64 = col.clone().filter(|v| *v > 0.0).sum();
                    let lo: f64 = col.filter(|v| *v < 0.0).sum();
                    sup_l.push((a[i] + hi).exp());
                    sup_m.push((-a[i] - lo).exp());
                }
                (sup_l, sup_m)
            }
            Rates::Constant { lambda, mu } => (lambda.clone(), mu.clone()),
        }
    }

    /// Lipschitz constant and total rate envelope on `[0, 1]^k`.
    pub fn lipschitz_bound(&self) -> LipschitzBound {
        let (sup_l, sup_m) = self.rate_suprema();
        let constant = (0..self.k)
            .map(|i| {
                let col: f64 = (0..self.k).map(|j| self.alpha(j, i).abs()).sum();
                col * sup_l[i].max(sup_m[i])
            })
            .fold(0.0, f64::max);
        let envelope = sup_l.iter().sum::<f64>() + sup_m.iter().sum::<f64>();
        LipschitzBound { constant, envelope }
    }

    pub fn to_doc(&self) -> ModelDoc {
        if let Some(c) = &self.cyclic {
            return ModelDoc::Cyclic { cyclic: c.clone() };
        }
        match &self.rates {
            Rates::MeanField { alpha, a } => ModelDoc::MeanField {
                k: self.k,
                alpha: alpha.chunks(self.k).map(<[f64]>::to_vec).collect(),
                a: a.clone(),
            },
            Rates::Constant { lambda, mu } => ModelDoc::Constant {
                constant: ConstantRates {
                    lambda: lambda.clone(),
                    mu: mu.clone(),
                },
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        Self::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("model documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantRates {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

/// JSON form of a model: `{"k", "alpha", "a"}`, `{"cyclic": {...}}` or
/// `{"constant": {"lambda": [...], "mu": [...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelDoc {
    Cyclic { cyclic: CyclicParams },
    Constant { constant: ConstantRates },
    MeanField { k: usize, alpha: Vec<Vec<f64>>, a: Vec<f64> },
}

impl TryFrom<ModelDoc> for ModelSpec {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        match doc {
            ModelDoc::Cyclic { cyclic } => ModelSpec::cyclic(&cyclic),
            ModelDoc::Constant { constant } => ModelSpec::constant(&constant.lambda, &constant.mu),
            ModelDoc::MeanField { k, alpha, a } => {
                if a.len() != k {
                    return Err(Error::Config(format!(
                        "k = {k} but the field vector has length {}",
                        a.len()
                    )));
                }
                ModelSpec::mean_field(&alpha, &a)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(k: usize) -> ModelSpec {
        ModelSpec::mean_field(&vec![vec![0.0; k]; k], &vec![0.0; k]).unwrap()
    }

    #[test]
    fn zero_interaction_gives_unit_rates() {
        let spec = zero(3);
        let (l, m) = spec.rates(&[0.1, 0.7, 0.3]);
        assert_eq!(l, vec![1.0; 3]);
        assert_eq!(m, vec![1.0; 3]);
    }

    #[test]
    fn constant_exponent() {
        let spec = ModelSpec::mean_field(&[vec![0.0]], &[2f64.ln()]).unwrap();
        assert!((spec.lambda_i(&[0.4], 0) - 2.0).abs() < 1e-15);
        assert!((spec.mu_i(&[0.4], 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cyclic_antiferro_hand_value() {
        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![-1, -1, -1], 4.0)).unwrap();
        // type 3 is driven by type 1
        let l3 = spec.lambda_i(&[0.75, 0.5, 0.5], 2);
        assert!((l3 - (-1f64).exp()).abs() < 1e-15);
        assert!((l3 - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn cyclic_construction() {
        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![1, 1, 1], 2.0)).unwrap();
        let nonzero: Vec<f64> = (0..3)
            .flat_map(|j| (0..3).map(move |i| (j, i)))
            .map(|(j, i)| spec.alpha(j, i))
            .filter(|v| *v != 0.0)
            .collect();
        assert_eq!(nonzero, vec![2.0; 3]);
        assert_eq!((0..3).map(|i| spec.field(i)).collect::<Vec<_>>(), vec![-1.0; 3]);

        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![-1, -1, -1], 4.0)).unwrap();
        for i in 0..3 {
            assert_eq!(spec.alpha((i + 1) % 3, i), -4.0);
            assert_eq!(spec.field(i), 2.0);
        }
    }

    #[test]
    fn cyclic_rejects_short_cycles() {
        assert!(matches!(
            ModelSpec::cyclic(&CyclicParams::new(vec![1, 1], 1.0)),
            Err(Error::Config(_))
        ));
        assert!(ModelSpec::cyclic(&CyclicParams::new(vec![1, 2, 1], 1.0)).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(ModelSpec::mean_field(&[vec![0.0, 0.0]], &[0.0, 0.0]).is_err());
        assert!(ModelSpec::mean_field(&vec![vec![0.0; 3]; 3], &[0.0, 0.0]).is_err());
        assert!(ModelSpec::mean_field(&[], &[]).is_err());
    }

    #[test]
    fn exponent_guard() {
        assert!(ModelSpec::mean_field(&[vec![400.0]], &[350.0]).is_err());
        assert!(ModelSpec::mean_field(&[vec![400.0]], &[250.0]).is_ok());
    }

    #[test]
    fn boundary_branches() {
        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![1, -1, 1], 3.0)).unwrap();
        let x = [1.0, 0.0, 0.4];
        let (f, g) = spec.eval_f_g(&x);
        assert_eq!(f[0], 0.0);
        assert_eq!(g[1], 0.0);
        let spec = zero(2);
        let (f, g) = spec.eval_f_g(&[0.25, 0.25]);
        assert_eq!(f, vec![0.75; 2]);
        assert_eq!(g, vec![0.25; 2]);
    }

    #[test]
    fn exterior_branches_use_clamped_coordinate() {
        // a self-interacting model, so replacing x_i matters
        let spec = ModelSpec::mean_field(&[vec![1.5, 0.0], vec![0.5, -1.0]], &[0.2, 0.1]).unwrap();
        let x = [-0.01, 1.02];
        let (f, g) = spec.eval_f_g(&x);
        let expect_f0 = spec.lambda_i(&[0.0, 1.02], 0);
        let expect_g1 = spec.mu_i(&[-0.01, 1.0], 1);
        assert!((f[0] - expect_f0).abs() < 1e-14);
        assert_eq!(g[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert!((g[1] - expect_g1).abs() < 1e-14);
    }

    #[test]
    fn velocity_vanishes_at_half() {
        for signs in [vec![1, 1, 1], vec![-1, 1, -1, 1], vec![-1, -1, -1, -1, -1]] {
            for j in [0.3, 2.0, 7.5] {
                let spec = ModelSpec::cyclic(&CyclicParams::new(signs.clone(), j)).unwrap();
                let v = spec.velocity(&vec![0.5; signs.len()]);
                assert!(v.iter().all(|vi| *vi == 0.0), "{v:?}");
            }
        }
        assert_eq!(zero(4).velocity(&[0.5; 4]), vec![0.0; 4]);
    }

    #[test]
    fn lipschitz_examples() {
        let b = zero(3).lipschitz_bound();
        assert_eq!(b.constant, 0.0);
        assert_eq!(b.envelope, 6.0);

        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![-1, -1, -1], 4.0)).unwrap();
        let (sup_l, sup_m) = spec.rate_suprema();
        let e2 = 2f64.exp();
        for i in 0..3 {
            assert!((sup_l[i] - e2).abs() < 1e-12);
            assert!((sup_m[i] - e2).abs() < 1e-12);
            // grid oracle
            let grid_max = (0..=1000)
                .map(|n| spec.lambda_i(&[n as f64 / 1000.0; 3], i))
                .fold(0.0, f64::max);
            assert!((grid_max - sup_l[i]).abs() < 1e-9);
        }
        let b = spec.lipschitz_bound();
        assert!((b.envelope - 6.0 * e2).abs() < 1e-10);
        assert!((b.envelope - 44.33).abs() < 0.01);

        let spec = ModelSpec::cyclic(&CyclicParams::new(vec![1, 1, 1], 0.0)).unwrap();
        assert_eq!(spec.lipschitz_bound().envelope, 6.0);
    }

    #[test]
    fn json_forms() {
        let spec = ModelSpec::from_json(r#"{"k": 2, "alpha": [[0, 1], [0.5, 0]], "a": [0.1, -0.2]}"#)
            .unwrap();
        assert_eq!(spec.alpha(0, 1), 1.0);
        assert_eq!(spec.field(1), -0.2);
        let back = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);

        let spec = ModelSpec::from_json(r#"{"cyclic": {"k": 3, "signs": [1, -1, 1], "J": 2.5}}"#)
            .unwrap();
        assert_eq!(spec.cyclic_params().unwrap().sign_product(), -1);
        assert!(spec.to_json().contains("cyclic"));

        let spec = ModelSpec::from_json(r#"{"constant": {"lambda": [0, 0], "mu": [0, 0]}}"#).unwrap();
        assert!(spec.is_constant());

        assert!(ModelSpec::from_json(r#"{"k": 3, "alpha": [[0]], "a": [0]}"#).is_err());
    }

    #[test]
    fn hamiltonian_reparametrization() {
        // brute-force ΔH on an explicit configuration
        fn energy(eta: &[Vec<i8>], alpha: &[Vec<f64>], a: &[f64], i: usize) -> f64 {
            let n = eta[0].len() as f64;
            let sums: Vec<f64> = eta
                .iter()
                .map(|row| row.iter().map(|v| f64::from(*v)).sum())
                .collect();
            let mut h = 0.0;
            for l in 0..eta[i].len() {
                let mut inner = a[i];
                for j in 0..eta.len() {
                    inner += alpha[j][i] / n * sums[j];
                }
                h += inner * f64::from(eta[i][l]);
            }
            -0.5 * h
        }
        let alpha = vec![vec![0.3, -1.0], vec![0.7, 0.2]];
        let a = vec![0.1, -0.4];
        let spec = ModelSpec::from_hamiltonian(&alpha, &a).unwrap();
        let n = 4000;
        let ups = [1400, 3200];
        let eta: Vec<Vec<i8>> = ups
            .iter()
            .map(|u| (0..n).map(|l| if l < *u { 1 } else { -1 }).collect())
            .collect();
        let m: Vec<f64> = ups.iter().map(|u| *u as f64 / n as f64).collect();
        for i in 0..2 {
            let mut up = eta.clone();
            up[i][ups[i]] = 1;
            let delta = energy(&up, &alpha, &a, i) - energy(&eta, &alpha, &a, i);
            assert!(((-delta).exp() / spec.lambda_i(&m, i) - 1.0).abs() < 10.0 / n as f64);

            let mut down = eta.clone();
            down[i][0] = -1;
            let delta = energy(&down, &alpha, &a, i) - energy(&eta, &alpha, &a, i);
            assert!(((-delta).exp() / spec.mu_i(&m, i) - 1.0).abs() < 10.0 / n as f64);
        }
    }
}
