//! Small dense linear algebra: real square matrices, Gaussian elimination,
//! and the full complex spectrum via Householder reduction to Hessenberg
//! form followed by Francis double-shift QR iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`eigenvalues`].
pub const MAX_EIGEN_DIM: usize = 64;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.n.max(1))
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.n)
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Input(format!("rhs has length {} for a {n}x{n} system", b.len())));
    }
    let mut m = a.rows();
    let mut x = b.to_vec();
    let scale = a.norm_inf().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::NumericalInstability("singular linear system".into()));
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for c in col..n {
                    m[row][c] -= factor * m[col][c];
                }
                x[row] -= factor * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (x[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Householder reduction to upper Hessenberg form (in place).
fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let f = (m..=high).rev().map(|i| ort[i] * h[i][j]).sum::<f64>() / hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut() {
            let f = (m..=high).rev().map(|j| ort[j] * row[j]).sum::<f64>() / hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns the real
/// and imaginary parts of the eigenvalues.
fn hessenberg_qr(h: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.len();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let eps = f64::EPSILON;
    let max_sweeps = 60 * nn.max(1);
    let mut sweeps = 0usize;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let mut norm = 0.0;
    for (i, row) in h.iter().enumerate() {
        for v in &row[i.saturating_sub(1)..] {
            norm += v.abs();
        }
    }

    let mut n = nn as isize - 1;
    let mut iter = 0;
    while n >= 0 {
        let nu = n as usize;
        // find a negligible subdiagonal element
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            let x = h[nu][nu];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            let mut x = h[nu][nu];
            let mut y = h[nu - 1][nu - 1];
            let mut w = h[nu][nu - 1] * h[nu - 1][nu];

            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::NoConvergence { sweeps });
            }

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // double QR step over rows l..=n and columns m..=n
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[i][k] + y * h[i][k + 1];
                        if notlast {
                            p += z * h[i][k + 2];
                            h[i][k + 2] -= p * r;
                        }
                        h[i][k] -= p;
                        h[i][k + 1] -= p * q;
                    }
                }
            }
        }
    }
    Ok((d, e))
}

/// Full complex spectrum of a small dense matrix, sorted by descending real
/// part (ties broken by descending imaginary part).
pub fn eigenvalues(a: &SquareMatrix) -> Result<Vec<Complex64>> {
    let n = a.dim();
    if n > MAX_EIGEN_DIM {
        return Err(Error::Input(format!(
            "dense eigenvalue solver is limited to {MAX_EIGEN_DIM}x{MAX_EIGEN_DIM}, got {n}x{n}"
        )));
    }
    if a.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalInstability("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.rows();
    hessenberg(&mut h);
    let (re, im) = hessenberg_qr(&mut h)?;
    let mut out: Vec<Complex64> = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
    out.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(out)
}

/// Eigenvector for a computed eigenvalue by complex inverse iteration,
/// normalized to unit Euclidean length.
pub fn eigenvector(a: &SquareMatrix, lambda: Complex64) -> Vec<Complex64> {
    let n = a.dim();
    let scale = a.norm_inf().max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64))
        .collect();
    for _ in 0..4 {
        v = complex_solve(a, shift, &v, scale);
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        for c in v.iter_mut() {
            *c /= norm;
        }
    }
    v
}

/// Solves `(A - shift I) x = b` in complex arithmetic; tiny pivots are
/// replaced by `eps * scale` so that near-singular shifts still produce a
/// usable direction.
fn complex_solve(a: &SquareMatrix, shift: Complex64, b: &[Complex64], scale: f64) -> Vec<Complex64> {
    let n = a.dim();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex64::new(a[(i, j)], 0.0);
                    if i == j {
                        v - shift
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut x = b.to_vec();
    let tiny = f64::EPSILON * scale;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].norm().total_cmp(&m[q][col].norm()))
            .unwrap();
        m.swap(col, pivot);
        x.swap(col, pivot);
        if m[col][col].norm() < tiny {
            m[col][col] = Complex64::new(tiny, 0.0);
        }
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for c in col..n {
                let sub = factor * m[col][c];
                m[row][c] -= sub;
            }
            let sub = factor * x[col];
            x[row] -= sub;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for c in row + 1..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// `‖(A - λI) v‖₂` for a unit vector `v`.
pub fn eigen_residual(a: &SquareMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.dim();
    (0..n)
        .map(|i| {
            let mut acc = -lambda * v[i];
            for j in 0..n {
                acc += a[(i, j)] * v[j];
            }
            acc.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_spectrum(a: &SquareMatrix) -> Vec<Complex64> {
        let ev = eigenvalues(a).unwrap();
        let tol = 1e-8 * a.norm_inf().max(1.0);
        for l in &ev {
            let v = eigenvector(a, *l);
            let res = eigen_residual(a, *l, &v);
            assert!(res <= tol, "residual {res} for {l}");
        }
        ev
    }

    #[test]
    fn diagonal_spectrum_sorted() {
        let ev = assert_spectrum(&SquareMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
        let re: Vec<f64> = ev.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![3.0, 2.0, 1.0]);
        assert!(ev.iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn rotation_block() {
        let a = SquareMatrix::from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]);
        let ev = assert_spectrum(&a);
        assert!((ev[0] - Complex64::new(0.0, 2.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, -2.0)).norm() < 1e-14);
    }

    /// Characteristic polynomial coefficients by Faddeev–LeVerrier.
    fn char_poly(a: &SquareMatrix) -> Vec<f64> {
        let n = a.dim();
        let mut coeffs = vec![1.0];
        let mut m = SquareMatrix::zeros(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{k-1} I
            let mut next = SquareMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    next[(i, j)] = (0..n).map(|l| a[(i, l)] * m[(l, j)]).sum::<f64>();
                }
                next[(i, i)] += coeffs[k - 1];
            }
            m = next;
            let trace: f64 = (0..n)
                .map(|i| (0..n).map(|l| a[(i, l)] * m[(l, i)]).sum::<f64>())
                .sum();
            coeffs.push(-trace / k as f64);
        }
        coeffs
    }

    fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
        c.iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc * z + v)
    }

    #[test]
    fn random_matrices_satisfy_characteristic_polynomial() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            for _ in 0..20 {
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
                    .collect();
                let a = SquareMatrix::from_rows(&rows);
                let ev = assert_spectrum(&a);
                assert_eq!(ev.len(), n);
                let c = char_poly(&a);
                for l in &ev {
                    let scale: f64 = c.iter().enumerate().map(|(i, ci)| ci.abs() * l.norm().powi((n - i) as i32)).sum();
                    assert!(poly_eval(&c, *l).norm() <= 1e-9 * scale.max(1.0));
                }
                let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
                let sum: Complex64 = ev.iter().sum();
                assert!((sum.re - trace).abs() < 1e-9 && sum.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn larger_matrices_converge() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in [16, 33, 64] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ev = assert_spectrum(&SquareMatrix::from_rows(&rows));
            assert_eq!(ev.len(), n);
        }
        assert!(eigenvalues(&SquareMatrix::zeros(65)).is_err());
    }

    #[test]
    fn solve_small_system() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        let singular = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve(&singular, &[1.0, 1.0]).is_err());
    }
}
