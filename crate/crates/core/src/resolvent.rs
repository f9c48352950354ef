//! Resolvent solves, weighted resolvent norms, scaling sweeps and the
//! limiting-absorption scan.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::Solve;
use faer::Mat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BandLu, LanczosOptions, C64, ZERO};
use crate::potential::Potential;
use crate::quantize::{self, DiscreteOperator, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams, Storage};

static BOUND_CHECKS: AtomicU64 = AtomicU64::new(0);
static BOUND_VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static BOUND_WORST: AtomicU64 = AtomicU64::new(0);

/// Running record of the check ‖u‖·Im z ≤ ‖f‖ over every dissipative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTally {
    pub checks: u64,
    pub violations: u64,
    /// max of ‖u‖·Im z/‖f‖ seen so far
    pub worst_ratio: f64,
}

pub fn resolvent_bound_tally() -> BoundTally {
    BoundTally {
        checks: BOUND_CHECKS.load(Ordering::SeqCst),
        violations: BOUND_VIOLATIONS.load(Ordering::SeqCst),
        worst_ratio: f64::from_bits(BOUND_WORST.load(Ordering::SeqCst)),
    }
}

fn record_bound(u_norm: f64, f_norm: f64, im_z: f64) {
    if f_norm == 0.0 {
        return;
    }
    let ratio = u_norm * im_z / f_norm;
    BOUND_CHECKS.fetch_add(1, Ordering::Relaxed);
    if ratio > 1.0 + 1e-10 {
        BOUND_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    // nonnegative floats order like their bit patterns
    BOUND_WORST.fetch_max(ratio.max(0.0).to_bits(), Ordering::Relaxed);
}

enum Factor {
    Diagonal(Vec<C64>),
    Banded(BandLu),
    Dense(PartialPivLu<C64>),
}

impl Factor {
    fn new(op: &DiscreteOperator, z: C64) -> Result<Factor> {
        match &op.storage {
            Storage::Diagonal(d) => {
                let shifted: Vec<C64> = d.iter().map(|v| v - z).collect();
                if let Some(k) = shifted.iter().position(|v| *v == ZERO) {
                    return Err(Error::SingularSystem { column: k });
                }
                Ok(Factor::Diagonal(shifted))
            }
            Storage::Banded(b) => {
                let mut s = b.clone();
                s.add_diagonal(&vec![-z; b.dim()]);
                Ok(Factor::Banded(s.lu()?))
            }
            Storage::Dense(m) => {
                let mut s = m.clone();
                for i in 0..s.nrows() {
                    s[(i, i)] -= z;
                }
                let lu = s.partial_piv_lu();
                Ok(Factor::Dense(lu))
            }
        }
    }

    fn solve(&self, f: &[C64]) -> Vec<C64> {
        match self {
            Factor::Diagonal(d) => f.iter().zip(d).map(|(a, b)| a / b).collect(),
            Factor::Banded(lu) => lu.solve(f),
            Factor::Dense(lu) => {
                let rhs = Mat::from_fn(f.len(), 1, |i, _| f[i]);
                let x = lu.solve(rhs);
                (0..f.len()).map(|i| x[(i, 0)]).collect()
            }
        }
    }
}

fn row_sum_norm(op: &DiscreteOperator) -> f64 {
    match &op.storage {
        Storage::Diagonal(d) => d.iter().map(|v| v.norm()).fold(0.0, f64::max),
        Storage::Banded(b) => {
            let mut rows = vec![0.0; b.dim()];
            b.for_each(|i, _, v| rows[i] += v.norm());
            rows.into_iter().fold(0.0, f64::max)
        }
        Storage::Dense(m) => (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max),
    }
}

/// Factorizations of H − z and H* − z̄ for repeated solves at one z.
pub struct ResolventSolver<'a> {
    op: &'a DiscreteOperator,
    adj: DiscreteOperator,
    z: C64,
    forward: Factor,
    adjoint: Factor,
    dissipative: bool,
    max_residual: Cell<f64>,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(op: &'a DiscreteOperator, z: C64) -> Result<Self> {
        let margin = quantize::dissipativity_check(op)?;
        Self::with_margin(op, z, margin)
    }

    /// As `new`, with the dissipativity margin supplied by the caller.
    pub fn with_margin(op: &'a DiscreteOperator, z: C64, margin: f64) -> Result<Self> {
        let adj = op.adjoint();
        let forward = Factor::new(op, z)?;
        let adjoint = Factor::new(&adj, z.conj())?;
        Ok(ResolventSolver { op, adj, z, forward, adjoint, dissipative: margin <= 1e-12, max_residual: Cell::new(0.0) })
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    /// Largest relative residual seen by this solver.
    pub fn max_residual(&self) -> f64 {
        self.max_residual.get()
    }

    fn finish(&self, op: &DiscreteOperator, z: C64, f: &[C64], factor: &Factor, check_bound: bool) -> Result<Vec<C64>> {
        let fnorm = linalg::norm(f);
        let mut u = factor.solve(f);
        let mut rel = f64::INFINITY;
        // iterative refinement for nearly singular shifts
        for _ in 0..3 {
            let mut r = op.apply(&u);
            linalg::axpy(-z, &u, &mut r);
            let defect = linalg::sub(f, &r);
            rel = if fnorm > 0.0 { linalg::norm(&defect) / fnorm } else { 0.0 };
            if rel <= 1e-13 {
                break;
            }
            let du = factor.solve(&defect);
            linalg::axpy(linalg::ONE, &du, &mut u);
        }
        self.max_residual.set(self.max_residual.get().max(rel));
        if !(rel <= 1e-10) {
            // Below ~eps·‖H−z‖·‖u‖/‖f‖ no rounded solution can do better;
            // accept such solves only if they are backward stable.
            let anorm = row_sum_norm(op) + z.norm();
            let eta = rel * fnorm / (anorm * linalg::norm(&u) + fnorm);
            if !(eta <= 1e-14) {
                return Err(Error::ToleranceExceeded { what: "relative solve residual".into(), measured: rel, tol: 1e-10 });
            }
        }
        if check_bound {
            record_bound(linalg::norm(&u), fnorm, z.im.abs());
        }
        Ok(u)
    }

    /// u = (H − z)⁻¹ f
    pub fn solve(&self, f: &[C64]) -> Result<Vec<C64>> {
        self.finish(self.op, self.z, f, &self.forward, self.dissipative && self.z.im > 0.0)
    }

    /// u = (H* − z̄)⁻¹ f
    pub fn solve_adjoint(&self, f: &[C64]) -> Result<Vec<C64>> {
        self.finish(&self.adj, self.z.conj(), f, &self.adjoint, self.dissipative && self.z.im > 0.0)
    }

    /// (H − z)⁻¹ applied to every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &Mat<C64>) -> Result<Mat<C64>> {
        let cols: Vec<Vec<C64>> = (0..rhs.ncols()).map(|j| self.solve(&linalg::column(rhs.as_ref(), j))).collect::<Result<_>>()?;
        Ok(Mat::from_fn(rhs.nrows(), rhs.ncols(), |i, j| cols[j][i]))
    }
}

/// (H − z)u = f by direct factorization.
pub fn solve(op: &DiscreteOperator, z: C64, f: &[C64]) -> Result<Vec<C64>> {
    ResolventSolver::new(op, z)?.solve(f)
}

#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub lanczos: LanczosOptions,
    /// Exact SVD fallback is allowed up to this dimension.
    pub dense_fallback_max: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { lanczos: LanczosOptions::default(), dense_fallback_max: 2048 }
    }
}

/// ‖W(H − z)⁻¹W‖ with W = diag(weights), plus the largest solve residual.
pub fn weighted_norm_with_residual(op: &DiscreteOperator, weights: &[f64], z: C64, margin: f64, opts: &NormOptions) -> Result<(f64, f64)> {
    let solver = ResolventSolver::with_margin(op, z, margin)?;
    let wv = |v: &[C64]| v.iter().zip(weights).map(|(a, w)| a * w).collect::<Vec<C64>>();
    let est = linalg::lanczos_norm(
        op.dim(),
        |v| Ok(wv(&solver.solve(&wv(v))?)),
        |v| Ok(wv(&solver.solve_adjoint(&wv(v))?)),
        opts.lanczos,
    );
    match est {
        Ok(n) => Ok((n, solver.max_residual())),
        Err(Error::PowerIterationStall { .. }) if op.dim() <= opts.dense_fallback_max => {
            let n = op.dim();
            let eye = Mat::from_fn(n, n, |i, j| if i == j { C64::from(weights[i]) } else { ZERO });
            let m = linalg::scale_rows(weights, solver.solve_matrix(&eye)?.as_ref());
            Ok((linalg::spectral_norm(m.as_ref())?, solver.max_residual()))
        }
        Err(e) => Err(e),
    }
}

pub fn weighted_norm(op: &DiscreteOperator, weights: &[f64], z: C64) -> Result<f64> {
    let margin = quantize::dissipativity_check(op)?;
    Ok(weighted_norm_with_residual(op, weights, z, margin, &NormOptions::default())?.0)
}

/// The fixed z-grid: `re_points` evenly spaced over I and Im z ∈ {μ, 2μ, 4μ}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ZGrid {
    pub fn standard(interval: (f64, f64), mu_min: f64) -> ZGrid {
        let (a, b) = interval;
        ZGrid { re: (0..5).map(|k| a + (b - a) * k as f64 / 4.0).collect(), im: vec![mu_min, 2.0 * mu_min, 4.0 * mu_min] }
    }

    pub fn points(&self) -> Vec<C64> {
        self.im.iter().flat_map(|im| self.re.iter().map(move |re| C64::new(*re, *im))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Re z step of the dense scan at the lowest Im z, in units of h.
    pub step_over_h: f64,
    /// Local maxima refined by golden section.
    pub refine_peaks: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { step_over_h: 0.125, refine_peaks: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub z: (f64, f64),
    pub norm: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub norm: f64,
    pub argmax: (f64, f64),
    /// The 15 fixed grid points, in grid order.
    pub grid_samples: Vec<NormSample>,
    pub evaluations: usize,
    pub max_residual: f64,
}

/// sup of the weighted norm over the z-grid, augmented by a dense Re z scan
/// at the lowest Im z and golden-section refinement of its local maxima.
pub fn sup_weighted_norm(
    op: &DiscreteOperator,
    weights: &[f64],
    zgrid: &ZGrid,
    interval: (f64, f64),
    h: f64,
    scan: Option<&ScanOptions>,
) -> Result<SupResult> {
    let margin = quantize::dissipativity_check(op)?;
    let opts = NormOptions::default();
    let eval = |z: C64| -> Result<NormSample> {
        let (norm, residual) = weighted_norm_with_residual(op, weights, z, margin, &opts)?;
        Ok(NormSample { z: (z.re, z.im), norm, residual })
    };
    let grid_samples: Vec<NormSample> = zgrid.points().into_par_iter().map(eval).collect::<Result<_>>()?;
    let mut best = grid_samples.iter().cloned().fold(None::<NormSample>, |a, s| match a {
        Some(a) if a.norm >= s.norm => Some(a),
        _ => Some(s),
    });
    let mut evaluations = grid_samples.len();
    if let Some(scan) = scan {
        let mu = zgrid.im.iter().cloned().fold(f64::INFINITY, f64::min);
        let (a, b) = interval;
        let step = scan.step_over_h * h;
        let m = ((b - a) / step).ceil().max(2.0) as usize;
        let res: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
        let scanned: Vec<NormSample> = res.par_iter().map(|re| eval(C64::new(*re, mu))).collect::<Result<_>>()?;
        evaluations += scanned.len();
        let mut peaks: Vec<usize> = (0..scanned.len())
            .filter(|&k| {
                let left = k == 0 || scanned[k - 1].norm <= scanned[k].norm;
                let right = k + 1 == scanned.len() || scanned[k + 1].norm <= scanned[k].norm;
                left && right
            })
            .collect();
        peaks.sort_by(|x, y| scanned[*y].norm.total_cmp(&scanned[*x].norm));
        peaks.truncate(scan.refine_peaks);
        let refined: Vec<(NormSample, usize)> = peaks
            .par_iter()
            .map(|&k| {
                let lo = res[k.saturating_sub(1)];
                let hi = res[(k + 1).min(m)];
                golden_max(lo, hi, step * 1e-3, |re| eval(C64::new(re, mu)))
            })
            .collect::<Result<_>>()?;
        for s in scanned.into_iter().chain(refined.into_iter().map(|(s, n)| {
            evaluations += n;
            s
        })) {
            if best.as_ref().map_or(true, |b| s.norm > b.norm) {
                best = Some(s);
            }
        }
    }
    let best = best.expect("z-grid is never empty");
    let max_residual = grid_samples.iter().map(|s| s.residual).fold(best.residual, f64::max);
    Ok(SupResult { norm: best.norm, argmax: best.z, grid_samples, evaluations, max_residual })
}

fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> Result<NormSample>) -> Result<(NormSample, usize)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut n = 2;
    while (b - a).abs() > tol && n < 60 {
        if fc.norm >= fd.norm {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        n += 1;
    }
    Ok((if fc.norm >= fd.norm { fc } else { fd }, n))
}

/// Everything a scaling sweep needs besides the list of h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub potential: Potential,
    pub grid: Grid,
    pub hamiltonian: HamiltonianConfig,
    pub nu_law: NuLaw,
    pub interval: (f64, f64),
    pub s: f64,
    pub mu_min: f64,
    pub scan: Option<ScanOptions>,
    /// Also evaluate on the refined grid and gate on the relative change.
    pub check_refinement: bool,
    pub convergence_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub h: f64,
    pub nu: f64,
    pub nu_tilde: f64,
    pub re_z: f64,
    pub im_z: f64,
    pub s: f64,
    pub norm: f64,
    pub residual: f64,
    pub grid_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub nu: f64,
    pub nu_tilde: f64,
    pub sup: SupResult,
    pub refined_norm: Option<f64>,
    pub relative_change: Option<f64>,
    pub grid_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub h_values: Vec<f64>,
    pub norms: Vec<f64>,
    pub points: Vec<SweepPoint>,
    /// slope of log ‖·‖ against log(1/(h ν̃(h)))
    pub fitted_slope: f64,
    pub fit_residual: f64,
    pub holder_exponent_fit: Option<f64>,
    pub grid_convergence_flag: bool,
    pub zgrid: ZGrid,
}

impl SweepResult {
    pub fn rows(&self, s: f64) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for p in &self.points {
            let mk = |smp: &NormSample| SweepRow {
                h: p.h,
                nu: p.nu,
                nu_tilde: p.nu_tilde,
                re_z: smp.z.0,
                im_z: smp.z.1,
                s,
                norm: smp.norm,
                residual: smp.residual,
                grid_converged: p.grid_converged,
            };
            rows.extend(p.sup.grid_samples.iter().map(mk));
            rows.push(SweepRow {
                re_z: p.sup.argmax.0,
                im_z: p.sup.argmax.1,
                norm: p.sup.norm,
                residual: p.sup.max_residual,
                ..mk(&p.sup.grid_samples[0])
            });
        }
        rows
    }

    pub fn require_converged(&self, tol: f64) -> Result<()> {
        for p in &self.points {
            if !p.grid_converged {
                return Err(Error::ConvergenceGateFailed { h: p.h, change: p.relative_change.unwrap_or(f64::NAN), tol });
            }
        }
        Ok(())
    }

    /// Slope of log ‖·‖ against log(1/h), whatever ν̃ is.
    pub fn slope_vs_inverse_h(&self) -> (f64, f64) {
        let x: Vec<f64> = self.h_values.iter().map(|h| (1.0 / h).ln()).collect();
        let y: Vec<f64> = self.norms.iter().map(|n| n.ln()).collect();
        let (s, _, r) = linalg::linear_fit(&x, &y);
        (s, r)
    }
}

fn sup_for(setup: &SweepSetup, grid: &Grid, params: &SemiclassicalParams) -> Result<SupResult> {
    let (_, op) = quantize::build_hamiltonian(grid, &setup.potential, params, &setup.hamiltonian)?;
    let w = quantize::weights(grid, setup.s);
    let zgrid = ZGrid::standard(setup.interval, setup.mu_min);
    sup_weighted_norm(&op, &w, &zgrid, setup.interval, params.h, setup.scan.as_ref())
}

pub fn scaling_sweep(setup: &SweepSetup, h_list: &[f64]) -> Result<SweepResult> {
    if h_list.len() < 2 {
        return Err(Error::precondition("a sweep needs at least two values of h", h_list.len() as f64));
    }
    let points: Vec<SweepPoint> = h_list
        .par_iter()
        .map(|&h| {
            let params = SemiclassicalParams::new(h, setup.nu_law.clone())?;
            let sup = sup_for(setup, &setup.grid, &params)?;
            let (refined_norm, relative_change, grid_converged) = if setup.check_refinement {
                let fine = sup_for(setup, &setup.grid.refined(), &params)?;
                let change = (fine.norm - sup.norm).abs() / sup.norm;
                (Some(fine.norm), Some(change), change <= setup.convergence_tol)
            } else {
                (None, None, false)
            };
            Ok(SweepPoint { h, nu: params.nu(), nu_tilde: params.nu_tilde(), sup, refined_norm, relative_change, grid_converged })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = points.iter().map(|p| (1.0 / (p.h * p.nu_tilde)).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.sup.norm.ln()).collect();
    let (fitted_slope, _, fit_residual) = linalg::linear_fit(&x, &y);
    Ok(SweepResult {
        h_values: points.iter().map(|p| p.h).collect(),
        norms: points.iter().map(|p| p.sup.norm).collect(),
        grid_convergence_flag: points.iter().all(|p| p.grid_converged),
        points,
        fitted_slope,
        fit_residual,
        holder_exponent_fit: None,
        zgrid: ZGrid::standard(setup.interval, setup.mu_min),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LapReport {
    pub lambda: f64,
    pub s: f64,
    pub mus: Vec<f64>,
    /// ‖F(μ_k)‖
    pub norms: Vec<f64>,
    /// ‖F(μ_k) − F(μ_{k+1})‖
    pub increments: Vec<f64>,
    pub increments_decreasing: bool,
    /// extrapolated ‖F(λ + i0)‖ from the last three norms
    pub extrapolated_norm: f64,
    pub holder_exponent: Option<f64>,
    pub holder_target: f64,
}

/// Aitken extrapolation of a geometric-rate sequence, falling back to linear
/// Richardson for a halving step when the differences are degenerate.
pub fn extrapolate_three(f1: f64, f2: f64, f3: f64) -> f64 {
    let d1 = f2 - f1;
    let d2 = f3 - f2;
    let denom = d2 - d1;
    if denom.abs() > 1e-14 * f3.abs().max(1e-300) && (d2 / d1) > 0.0 && (d2 / d1) < 1.0 {
        f3 - d2 * d2 / denom
    } else {
        2.0 * f3 - f2
    }
}

/// Norm of W[(H − z₁)⁻¹ − (H − z₂)⁻¹]W by Lanczos.
pub fn weighted_difference_norm(op: &DiscreteOperator, weights: &[f64], z1: C64, z2: C64, margin: f64) -> Result<f64> {
    let s1 = ResolventSolver::with_margin(op, z1, margin)?;
    let s2 = ResolventSolver::with_margin(op, z2, margin)?;
    let wv = |v: &[C64]| v.iter().zip(weights).map(|(a, w)| a * w).collect::<Vec<C64>>();
    linalg::lanczos_norm(
        op.dim(),
        |v| {
            let x = wv(v);
            Ok(wv(&linalg::sub(&s1.solve(&x)?, &s2.solve(&x)?)))
        },
        |v| {
            let x = wv(v);
            Ok(wv(&linalg::sub(&s1.solve_adjoint(&x)?, &s2.solve_adjoint(&x)?)))
        },
        LanczosOptions::default(),
    )
}

/// Increments of F(μ) = W(H − λ − iμ)⁻¹W along a decreasing μ sequence,
/// extrapolated limit and, optionally, a Hölder fit in λ from offsets δ.
pub fn limiting_absorption_scan(
    op: &DiscreteOperator,
    weights: &[f64],
    s: f64,
    lambda: f64,
    mus: &[f64],
    holder_offsets: Option<&[f64]>,
) -> Result<LapReport> {
    if mus.len() < 3 || mus.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::precondition("mu sequence must be positive, strictly decreasing, length >= 3", mus.len() as f64));
    }
    let margin = quantize::dissipativity_check(op)?;
    let opts = NormOptions::default();
    let norms: Vec<f64> = mus
        .par_iter()
        .map(|mu| Ok(weighted_norm_with_residual(op, weights, C64::new(lambda, *mu), margin, &opts)?.0))
        .collect::<Result<_>>()?;
    let increments: Vec<f64> = (0..mus.len() - 1)
        .into_par_iter()
        .map(|k| weighted_difference_norm(op, weights, C64::new(lambda, mus[k]), C64::new(lambda, mus[k + 1]), margin))
        .collect::<Result<_>>()?;
    let decreasing = increments.windows(2).all(|w| w[1] < w[0]);
    if !decreasing {
        return Err(Error::NoConvergence(format!("Cauchy increments not decreasing: {increments:?}")));
    }
    let k = norms.len();
    let extrapolated_norm = extrapolate_three(norms[k - 3], norms[k - 2], norms[k - 1]);
    let mu_last = *mus.last().unwrap();
    let holder_exponent = match holder_offsets {
        Some(offs) if offs.len() >= 2 => {
            let diffs: Vec<f64> = offs
                .par_iter()
                .map(|d| weighted_difference_norm(op, weights, C64::new(lambda + d, mu_last), C64::new(lambda, mu_last), margin))
                .collect::<Result<_>>()?;
            let x: Vec<f64> = offs.iter().map(|d| d.ln()).collect();
            let y: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
            Some(linalg::linear_fit(&x, &y).0)
        }
        _ => None,
    };
    Ok(LapReport {
        lambda,
        s,
        mus: mus.to_vec(),
        norms,
        increments,
        increments_decreasing: decreasing,
        extrapolated_norm,
        holder_exponent,
        holder_target: (2.0 * s - 1.0) / (2.0 * s + 1.0),
    })
}

/// ‖1_{ℝ₋}(A)(H − z)⁻¹⟨A⟩⁻ˢ‖ by diagonalizing A.
pub fn negative_projection_estimate(op: &DiscreteOperator, a: &DiscreteOperator, z: C64, s: f64) -> Result<f64> {
    if a.hermitian_defect() > 1e-10 * a.max_abs().max(1.0) {
        return Err(Error::precondition("A must be hermitian", a.hermitian_defect()));
    }
    let (vals, vecs) = linalg::hermitian_eigen(a.to_dense().as_ref())?;
    let neg: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] < 0.0).collect();
    if neg.is_empty() {
        return Ok(0.0);
    }
    let jap: Vec<f64> = vals.iter().map(|l| (1.0 + l * l).powf(-0.5 * s)).collect();
    let solver = ResolventSolver::new(op, z)?;
    let x = solver.solve_matrix(&linalg::scale_cols(vecs.as_ref(), &jap))?;
    let n = vals.len();
    let m = Mat::from_fn(neg.len(), n, |r, c| (0..n).map(|i| vecs[(i, neg[r])].conj() * x[(i, c)]).sum::<C64>());
    linalg::spectral_norm(m.as_ref())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// ‖B(T − z)⁻¹Q‖ against ‖Q(T − z)⁻¹Q‖^{1/2} for T = T_R − iT_I.
pub fn quadratic_estimate_check(t_r: &Mat<C64>, t_i: &Mat<C64>, b: &Mat<C64>, q: &Mat<C64>, z: C64) -> Result<QuadraticEstimate> {
    if !(z.im > 0.0) {
        return Err(Error::precondition("Im z must be positive", z.im));
    }
    let (ti_eigs, _) = linalg::hermitian_eigen(t_i.as_ref())?;
    if let Some(min) = ti_eigs.first().filter(|v| **v < -1e-10) {
        return Err(Error::precondition("T_I must be positive semidefinite", *min));
    }
    let bb = b.adjoint() * b;
    let (gap, _) = linalg::hermitian_eigen((t_i - &bb).as_ref())?;
    if let Some(min) = gap.first().filter(|v| **v < -1e-10) {
        return Err(Error::precondition("B*B must be dominated by T_I", *min));
    }
    let qd = linalg::hermitian_defect(q.as_ref());
    if qd > 1e-10 {
        return Err(Error::precondition("Q must be hermitian", qd));
    }
    let n = t_r.nrows();
    let t = Mat::from_fn(n, n, |i, j| t_r[(i, j)] - linalg::I * t_i[(i, j)]);
    let op = DiscreteOperator::new(Storage::Dense(t), quantize::Role::Other("T".into()));
    let solver = ResolventSolver::new(&op, z)?;
    let rq = solver.solve_matrix(q)?;
    let lhs = linalg::spectral_norm((b * &rq).as_ref())?;
    let rhs = linalg::spectral_norm((q * &rq).as_ref())?.sqrt();
    Ok(QuadraticEstimate { lhs, rhs, holds: lhs <= rhs + 1e-10 })
}

/// (T_R, T_I, B = √T_I, Q) with T_R, Q random hermitian and T_I ⪰ 0.
pub fn random_dissipative_instance(dim: usize, rng: &mut impl Rng) -> Result<(Mat<C64>, Mat<C64>, Mat<C64>, Mat<C64>)> {
    let mut gauss = || C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    let g1 = Mat::from_fn(dim, dim, |_, _| gauss());
    let g2 = Mat::from_fn(dim, dim, |_, _| gauss());
    let g3 = Mat::from_fn(dim, dim, |_, _| gauss());
    let scale = 1.0 / (dim as f64).sqrt();
    let herm = |g: &Mat<C64>| Mat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * scale);
    let t_r = herm(&g1);
    let q = herm(&g3);
    let t_i = Mat::from_fn(dim, dim, |i, j| (0..dim).map(|k| g2[(i, k)] * g2[(j, k)].conj()).sum::<C64>() * (scale * scale));
    let (vals, vecs) = linalg::hermitian_eigen(t_i.as_ref())?;
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let b = linalg::scale_cols(vecs.as_ref(), &roots) * vecs.adjoint();
    // rebuild T_I from B so that B*B ⪯ T_I holds to round-off
    let t_i = b.adjoint() * &b;
    Ok((t_r, t_i, b, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: C64) -> DiscreteOperator {
        DiscreteOperator::new(Storage::Diagonal(vec![v]), quantize::Role::H)
    }

    #[test]
    fn scalar_solve() {
        let u = solve(&scalar(ZERO), linalg::I, &[linalg::ONE]).unwrap();
        assert!((u[0] - linalg::I).norm() < 1e-15);
    }

    #[test]
    fn scalar_weighted_norm() {
        let z = C64::new(0.7, 0.2);
        let n = weighted_norm(&scalar(ZERO), &[1.0], z).unwrap();
        assert!((n - 1.0 / z.norm()).abs() < 1e-14);
    }

    #[test]
    fn hermitian_norm_is_inverse_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t_r, _, _, _) = random_dissipative_instance(40, &mut rng).unwrap();
        let op = DiscreteOperator::new(Storage::Dense(t_r.clone()), quantize::Role::H);
        let z = C64::new(0.1, 0.05);
        let (vals, _) = linalg::hermitian_eigen(t_r.as_ref()).unwrap();
        let dist = vals.iter().map(|l| (C64::from(*l) - z).norm()).fold(f64::INFINITY, f64::min);
        let n = weighted_norm(&op, &[1.0; 40], z).unwrap();
        assert!((n * dist - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quadratic_estimate_examples() {
        let one = Mat::from_fn(1, 1, |_, _| linalg::ONE);
        let zero = Mat::<C64>::zeros(1, 1);
        let r = quadratic_estimate_check(&zero, &one, &one, &one, linalg::I).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-15 && (r.rhs - 0.5f64.sqrt()).abs() < 1e-15 && r.holds);
        let r = quadratic_estimate_check(&zero, &one, &zero, &one, linalg::I).unwrap();
        assert_eq!(r.lhs, 0.0);
        let two = Mat::from_fn(1, 1, |_, _| C64::from(2.0));
        assert!(matches!(
            quadratic_estimate_check(&zero, &one, &two, &one, linalg::I),
            Err(Error::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn negative_projection_examples() {
        let a = DiscreteOperator::new(Storage::Diagonal(vec![C64::from(-1.0)]), quantize::Role::DilationGenerator);
        let v = negative_projection_estimate(&scalar(ZERO), &a, linalg::I, 2.0).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let pos = DiscreteOperator::new(Storage::Diagonal(vec![C64::from(1.0), C64::from(3.0)]), quantize::Role::DilationGenerator);
        let h = DiscreteOperator::new(Storage::Diagonal(vec![ZERO, ZERO]), quantize::Role::H);
        assert_eq!(negative_projection_estimate(&h, &pos, linalg::I, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn extrapolation_of_geometric_sequence() {
        let f = |mu: f64| 3.0 + 0.7 * mu.powf(0.6);
        let v = extrapolate_three(f(4e-3), f(2e-3), f(1e-3));
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bound_tally_counts_dissipative_solves() {
        let before = resolvent_bound_tally().checks;
        let op = DiscreteOperator::new(Storage::Diagonal(vec![C64::new(1.0, -0.5), C64::new(-2.0, 0.0)]), quantize::Role::H);
        solve(&op, C64::new(0.3, 0.1), &[linalg::ONE, linalg::ONE]).unwrap();
        let t = resolvent_bound_tally();
        assert!(t.checks > before && t.worst_ratio <= 1.0 + 1e-10);
    }
}
