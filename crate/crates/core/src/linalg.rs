//! Complex linear algebra: banded storage with a pivoted LU, dense helpers
//! on top of faer, and a Lanczos estimate of the largest singular value.

use faer::prelude::Solve;
use faer::{Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Hermitian inner product, conjugate-linear in `a`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn scale(a: &mut [C64], s: C64) {
    a.iter_mut().for_each(|x| *x *= s);
}

/// y += alpha * x
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Square band matrix. Row `i` stores columns `i-kl ..= i+ku` at offset
/// `j + kl - i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![ZERO; n * (kl + ku + 1)] }
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), 0, 0);
        m.data.copy_from_slice(d);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            ZERO
        }
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn add_diagonal(&mut self, d: &[C64]) {
        for (i, v) in d.iter().enumerate() {
            self.add(i, i, *v);
        }
    }

    /// Copy with a larger band so that other matrices can be added in.
    pub fn widened(&self, kl: usize, ku: usize) -> BandMatrix {
        let kl = kl.max(self.kl);
        let ku = ku.max(self.ku);
        let mut out = BandMatrix::zeros(self.n, kl, ku);
        self.for_each(|i, j, v| out.set(i, j, v));
        out
    }

    pub fn for_each(&self, mut f: impl FnMut(usize, usize, C64)) {
        let w = self.width();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                f(i, j, self.data[i * w + j + self.kl - i]);
            }
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let w = self.width();
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                let row = &self.data[i * w..(i + 1) * w];
                (lo..=hi).map(|j| row[j + self.kl - i] * x[j]).sum()
            })
            .collect()
    }

    pub fn adjoint(&self) -> BandMatrix {
        let mut out = BandMatrix::zeros(self.n, self.ku, self.kl);
        self.for_each(|i, j, v| out.set(j, i, v.conj()));
        out
    }

    pub fn scaled(&self, s: C64) -> BandMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn plus(&self, other: &BandMatrix) -> BandMatrix {
        let mut out = self.widened(other.kl, other.ku);
        other.for_each(|i, j, v| out.add(i, j, v));
        out
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.n, self.n);
        self.for_each(|i, j, v| m[(i, j)] = v);
        m
    }

    /// max |M_ij - conj(M_ji)|
    pub fn hermitian_defect(&self) -> f64 {
        let mut d = 0.0f64;
        self.for_each(|i, j, v| d = d.max((v - self.get(j, i).conj()).norm()));
        d
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// LU with partial pivoting of a band matrix; the upper factor grows to
/// bandwidth `kl + ku`.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+kl+ku at offset j + kl - i
    a: Vec<C64>,
    lower: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(m: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let w = 2 * kl + ku + 1;
        let mut a = vec![ZERO; n * w];
        m.for_each(|i, j, v| a[i * w + j + kl - i] = v);
        let mut lower = vec![ZERO; n * kl.max(1)];
        let mut piv = vec![0usize; n];
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let scale = m.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].norm();
            for r in k + 1..=last {
                let v = a[idx(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || best <= f64::EPSILON * 1e-3 * scale {
                return Err(Error::SingularSystem { column: k });
            }
            piv[k] = p;
            let cmax = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    a.swap(idx(k, c), idx(p, c));
                }
            }
            let inv = ONE / a[idx(k, k)];
            for r in k + 1..=last {
                let l = a[idx(r, k)] * inv;
                lower[k * kl + (r - k - 1)] = l;
                if l != ZERO {
                    for c in k + 1..=cmax {
                        let u = a[idx(k, c)];
                        a[idx(r, c)] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, a, lower, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = 2 * kl + ku + 1;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let cmax = (k + kl + ku).min(n - 1);
            let row = &self.a[k * w..(k + 1) * w];
            let mut s = b[k];
            for c in k + 1..=cmax {
                s -= row[c + kl - k] * b[c];
            }
            b[k] = s / row[kl];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dense_from_fn(n: usize, m: usize, f: impl FnMut(usize, usize) -> C64) -> Mat<C64> {
    Mat::from_fn(n, m, f)
}

pub fn dense_matvec(a: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for i in 0..a.nrows() {
            y[i] += col[i] * xj;
        }
    }
    y
}

pub fn column(a: MatRef<'_, C64>, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn diag_mat(d: &[C64]) -> Mat<C64> {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { ZERO })
}

/// Scale rows: diag(d) * a.
pub fn scale_rows(d: &[f64], a: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[i])
}

/// Scale columns: a * diag(d).
pub fn scale_cols(a: MatRef<'_, C64>, d: &[f64]) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[j])
}

pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn hermitian_defect(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows() - 1) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a hermitian matrix.
pub fn hermitian_eigen(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::DiagonalizationFailed(format!("{e:?}")))?;
    let s = e.S();
    let vals: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigen-decomposition of a general square matrix: A = V diag(λ) V⁻¹.
pub struct GeneralEigen {
    pub values: Vec<C64>,
    pub vectors: Mat<C64>,
    pub inverse: Mat<C64>,
}

pub fn general_eigen(a: MatRef<'_, C64>) -> Result<GeneralEigen> {
    let e = a.eigen().map_err(|e| Error::DiagonalizationFailed(format!("{e:?}")))?;
    let s = e.S();
    let values: Vec<C64> = (0..a.nrows()).map(|i| s[i]).collect();
    let vectors = e.U().to_owned();
    let inverse = vectors.partial_piv_lu().solve(Mat::<C64>::identity(a.nrows(), a.nrows()));
    let check = max_abs((&vectors * &inverse - Mat::<C64>::identity(a.nrows(), a.nrows())).as_ref());
    if !check.is_finite() || check > 1e-6 {
        return Err(Error::DiagonalizationFailed(format!(
            "eigenvector matrix is ill-conditioned (V V^-1 - I = {check:.2e})"
        )));
    }
    Ok(GeneralEigen { values, vectors, inverse })
}

pub fn singular_values(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(vec![0.0]);
    }
    a.singular_values().map_err(|e| Error::DiagonalizationFailed(format!("{e:?}")))
}

pub fn spectral_norm(a: MatRef<'_, C64>) -> Result<f64> {
    Ok(singular_values(a)?.into_iter().fold(0.0, f64::max))
}

pub fn dense_inverse(a: MatRef<'_, C64>) -> Mat<C64> {
    a.partial_piv_lu().solve(Mat::<C64>::identity(a.nrows(), a.nrows()))
}

/// Unit vector with deterministic complex Gaussian-ish entries.
pub fn seeded_unit_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> =
        (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let nv = norm(&v);
    scale(&mut v, C64::from(1.0 / nv));
    v
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { rel_tol: 1e-8, max_iter: 300, seed: 0x5eed }
    }
}

/// Largest singular value of M from products with M and M*. Lanczos on M*M
/// with full reorthogonalization; converged when the top Ritz value changes
/// by less than `rel_tol` twice in a row.
pub fn lanczos_norm(
    n: usize,
    mut apply: impl FnMut(&[C64]) -> Result<Vec<C64>>,
    mut apply_adj: impl FnMut(&[C64]) -> Result<Vec<C64>>,
    opts: LanczosOptions,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let max_iter = opts.max_iter.min(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_iter + 1);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    basis.push(seeded_unit_vector(n, opts.seed));
    let mut prev = 0.0f64;
    let mut calm = 0;
    let mut change = f64::INFINITY;
    for k in 0..max_iter {
        let mut w = apply_adj(&apply(&basis[k])?)?;
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let theta = top_ritz(&alpha, &beta)?;
        change = if theta > 0.0 { (theta - prev).abs() / theta } else { 0.0 };
        prev = theta;
        if change < opts.rel_tol {
            calm += 1;
        } else {
            calm = 0;
        }
        if calm >= 2 || b <= 1e-13 * theta.max(f64::MIN_POSITIVE) || k + 1 == n {
            return Ok(theta.max(0.0).sqrt());
        }
        beta.push(b);
        scale(&mut w, C64::from(1.0 / b));
        basis.push(w);
    }
    Err(Error::PowerIterationStall { iterations: max_iter, last_change: change })
}

fn top_ritz(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    let k = alpha.len();
    let t = Mat::<C64>::from_fn(k, k, |i, j| {
        if i == j {
            C64::from(alpha[i])
        } else if i + 1 == j || j + 1 == i {
            C64::from(beta[i.min(j)])
        } else {
            ZERO
        }
    });
    let (vals, _) = hermitian_eigen(t.as_ref())?;
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Least-squares line y = a + b x; returns (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Composite Simpson on uniform samples; falls back to trapezoid on the
/// last interval when the count of intervals is odd.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let intervals = m - 1;
    let even = intervals - intervals % 2;
    let mut s = 0.0;
    let mut k = 0;
    while k < even {
        s += dt / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
        k += 2;
    }
    if even < intervals {
        s += 0.5 * dt * (values[intervals - 1] + values[intervals]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.set(i, j, C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            }
        }
        m
    }

    #[test]
    fn band_lu_matches_dense_solution() {
        for &(kl, ku) in &[(0, 0), (1, 1), (2, 2), (1, 3), (3, 0)] {
            let m = random_band(37, kl, ku, 11 + kl as u64);
            let b = seeded_unit_vector(37, 3);
            let x = m.lu().unwrap().solve(&b);
            let r = sub(&m.matvec(&x), &b);
            assert!(norm(&r) < 1e-11, "kl={kl} ku={ku} residual {}", norm(&r));
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = BandMatrix::zeros(2, 1, 1);
        m.set(0, 1, ONE);
        m.set(1, 0, ONE);
        let x = m.lu().unwrap().solve(&[C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);
        assert!((x[0] - C64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - C64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_band_is_reported() {
        let m = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(m.lu(), Err(Error::SingularSystem { column: 0 })));
    }

    #[test]
    fn lanczos_agrees_with_svd() {
        let m = random_band(60, 2, 3, 5).to_dense();
        let exact = spectral_norm(m.as_ref()).unwrap();
        let adj = m.adjoint().to_owned();
        let est = lanczos_norm(
            60,
            |v| Ok(dense_matvec(m.as_ref(), v)),
            |v| Ok(dense_matvec(adj.as_ref(), v)),
            LanczosOptions::default(),
        )
        .unwrap();
        assert!((est - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let dt = 0.1;
        let v: Vec<f64> = (0..=10).map(|k| (k as f64 * dt).powi(3)).collect();
        assert!((simpson(&v, dt) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let (s, c, r) = linear_fit(&x, &y);
        assert!((s + 2.0).abs() < 1e-14 && (c - 0.5).abs() < 1e-14 && r < 1e-14);
    }
}
