//! Selfadjoint dilation K of H = H₁ − ihV₂ on channel ⊕ interior ⊕ channel.
//!
//! K(φ₋, φ₀, φ₊) = (−iφ₋', H₁φ₀ − W(φ₋(0) + φ₊(0))/2, −iφ₊') with the jump
//! φ₊(0) − φ₋(0) = iWφ₀ and W = √(2hV₂), restricted to the points where V₂ > 0.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::egorov::{PropagationMethod, Propagator, PropagatorPlan};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::potential::Potential;
use crate::quantize::{self, DiscreteOperator, Grid, HamiltonianConfig, NuLaw, Role, SemiclassicalParams, StencilOrder, Storage};
use crate::resolvent::ResolventSolver;

/// V₂ values at or below this are outside the channel support.
pub const CHANNEL_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DilationSystem {
    pub h: f64,
    pub h1: DiscreteOperator,
    /// H₁ − ihV₂
    pub hamiltonian: DiscreteOperator,
    pub v2: Vec<f64>,
    /// interior indices carrying a channel fiber
    pub omega: Vec<usize>,
    /// √(2hV₂) on `omega`
    pub w: Vec<f64>,
    pub channel_length: f64,
    pub channel_spacing: f64,
    pub truncation_tol: f64,
}

impl DilationSystem {
    pub fn from_parts(h1: DiscreteOperator, v2: Vec<f64>, h: f64, channel_length: f64, channel_spacing: f64) -> Result<Self> {
        if !(channel_length > 0.0) {
            return Err(Error::precondition("channel length must be positive", channel_length));
        }
        if !(channel_spacing > 0.0) || channel_spacing > channel_length {
            return Err(Error::precondition("channel spacing must lie in (0, L]", channel_spacing));
        }
        if v2.len() != h1.dim() {
            return Err(Error::precondition("V2 length differs from the interior dimension", v2.len() as f64));
        }
        if let Some(bad) = v2.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::precondition("V2 must be nonnegative", *bad));
        }
        let absorb: Vec<C64> = v2.iter().map(|v| C64::new(0.0, -h * v)).collect();
        let storage = match &h1.storage {
            Storage::Diagonal(d) => Storage::Diagonal(d.iter().zip(&absorb).map(|(a, b)| a + b).collect()),
            Storage::Banded(b) => {
                let mut b = b.clone();
                b.add_diagonal(&absorb);
                Storage::Banded(b)
            }
            Storage::Dense(m) => Storage::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                m[(i, j)] + if i == j { absorb[i] } else { ZERO }
            })),
        };
        let omega: Vec<usize> = (0..v2.len()).filter(|&i| v2[i] > CHANNEL_THRESHOLD).collect();
        let w = omega.iter().map(|&i| (2.0 * h * v2[i]).sqrt()).collect();
        Ok(DilationSystem {
            h,
            hamiltonian: DiscreteOperator::new(storage, Role::H),
            h1,
            v2,
            omega,
            w,
            channel_length,
            channel_spacing,
            truncation_tol: 1e-6,
        })
    }

    /// 1×1 interior H₁ = λ₀, V₂ = v.
    pub fn scalar(lambda0: f64, v: f64, h: f64, channel_length: f64, channel_spacing: f64) -> Result<Self> {
        let h1 = DiscreteOperator::new(Storage::Diagonal(vec![C64::from(lambda0)]), Role::H1);
        Self::from_parts(h1, vec![v], h, channel_length, channel_spacing)
    }

    /// Interior from a potential on a grid, without sponge and with ν(h) = h.
    pub fn from_potential(grid: &Grid, pot: &Potential, h: f64, stencil: StencilOrder, channel_length: f64, channel_spacing: f64) -> Result<Self> {
        let params = SemiclassicalParams::new(h, NuLaw::Linear)?;
        let cfg = HamiltonianConfig { stencil, sponge: None, e_max: None };
        let (h1, _) = quantize::build_hamiltonian(grid, pot, &params, &cfg)?;
        let v2 = grid.nodes().iter().map(|x| pot.v2(*x)).collect();
        Self::from_parts(h1, v2, h, channel_length, channel_spacing)
    }

    pub fn interior_dim(&self) -> usize {
        self.h1.dim()
    }

    pub fn channel_count(&self) -> usize {
        self.omega.len()
    }

    pub fn channel_points(&self) -> usize {
        (self.channel_length / self.channel_spacing).round() as usize + 1
    }

    /// Actual quadrature step (L divided evenly).
    pub fn step(&self) -> f64 {
        self.channel_length / (self.channel_points() - 1) as f64
    }

    pub fn with_spacing(&self, spacing: f64) -> Self {
        DilationSystem { channel_spacing: spacing, ..self.clone() }
    }

    fn check_truncation(&self, z: C64) -> Result<f64> {
        if z.im == 0.0 {
            return Err(Error::precondition("Im z must be nonzero", z.im));
        }
        let bound = (-z.im.abs() * self.channel_length).exp();
        if bound > self.truncation_tol {
            return Err(Error::TruncationError { bound, tol: self.truncation_tol });
        }
        Ok(bound)
    }

    fn embed(&self, fiber: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.interior_dim()];
        for ((&i, w), f) in self.omega.iter().zip(&self.w).zip(fiber) {
            out[i] = f * *w;
        }
        out
    }

    fn restrict(&self, v: &[C64]) -> Vec<C64> {
        self.omega.iter().zip(&self.w).map(|(&i, w)| v[i] * *w).collect()
    }
}

/// (φ₋, φ₀, φ₊); channel fields are rows per Ω index, columns per r sample.
/// φ₋ is sampled on −L, …, 0 and φ₊ on 0, …, L.
#[derive(Clone, Debug, PartialEq)]
pub struct DilationState {
    pub phi_minus: Mat<C64>,
    pub phi_0: Vec<C64>,
    pub phi_plus: Mat<C64>,
}

impl DilationState {
    pub fn zeros(sys: &DilationSystem) -> Self {
        let (m, n) = (sys.channel_count(), sys.channel_points());
        DilationState { phi_minus: Mat::zeros(m, n), phi_0: vec![ZERO; sys.interior_dim()], phi_plus: Mat::zeros(m, n) }
    }

    pub fn interior(sys: &DilationSystem, phi_0: Vec<C64>) -> Self {
        DilationState { phi_0, ..Self::zeros(sys) }
    }

    /// φ₋(0) per fiber.
    pub fn trace_minus(&self) -> Vec<C64> {
        let last = self.phi_minus.ncols() - 1;
        (0..self.phi_minus.nrows()).map(|j| self.phi_minus[(j, last)]).collect()
    }

    /// φ₊(0) per fiber.
    pub fn trace_plus(&self) -> Vec<C64> {
        (0..self.phi_plus.nrows()).map(|j| self.phi_plus[(j, 0)]).collect()
    }

    /// 𝒦 norm with trapezoid weights in r.
    pub fn norm(&self, spacing: f64) -> f64 {
        let channel = |m: &Mat<C64>| -> f64 {
            let n = m.ncols();
            let mut s = 0.0;
            for j in 0..m.nrows() {
                for k in 0..n {
                    let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                    s += w * m[(j, k)].norm_sqr();
                }
            }
            s * spacing
        };
        (channel(&self.phi_minus) + linalg::norm(&self.phi_0).powi(2) + channel(&self.phi_plus)).sqrt()
    }

    pub fn difference(&self, other: &DilationState) -> DilationState {
        DilationState {
            phi_minus: &self.phi_minus - &other.phi_minus,
            phi_0: linalg::sub(&self.phi_0, &other.phi_0),
            phi_plus: &self.phi_plus - &other.phi_plus,
        }
    }
}

/// ψ(r_{k+1}) = e^{izδ}ψ(r_k) + i∫ e^{iz(r_{k+1}−s)}φ(s) ds, trapezoid on each cell.
fn sweep_forward(z: C64, delta: f64, start: C64, phi: impl Fn(usize) -> C64, n: usize) -> Vec<C64> {
    let e = (C64::i() * z * delta).exp();
    let half = C64::new(0.0, 0.5 * delta);
    let mut out = Vec::with_capacity(n);
    out.push(start);
    for k in 0..n - 1 {
        let next = e * out[k] + half * (e * phi(k) + phi(k + 1));
        out.push(next);
    }
    out
}

/// ψ(r_k) = e^{−izδ}ψ(r_{k+1}) − i∫ e^{iz(r_k−s)}φ(s) ds, trapezoid on each cell.
fn sweep_backward(z: C64, delta: f64, end: C64, phi: impl Fn(usize) -> C64, n: usize) -> Vec<C64> {
    let e = (-C64::i() * z * delta).exp();
    let half = C64::new(0.0, 0.5 * delta);
    let mut out = vec![ZERO; n];
    out[n - 1] = end;
    for k in (0..n - 1).rev() {
        out[k] = e * out[k + 1] - half * (phi(k) + e * phi(k + 1));
    }
    out
}

/// (K − z)⁻¹Φ by the channel formulas and one interior solve.
/// Im z > 0 uses H; Im z < 0 uses H* through the adjoint solve.
pub fn dilation_resolvent(sys: &DilationSystem, z: C64, state: &DilationState) -> Result<DilationState> {
    sys.check_truncation(z)?;
    let n = sys.channel_points();
    let delta = sys.step();
    let m = sys.channel_count();
    let mut out = DilationState::zeros(sys);
    if z.im > 0.0 {
        for j in 0..m {
            let col = sweep_forward(z, delta, ZERO, |k| state.phi_minus[(j, k)], n);
            for (k, v) in col.into_iter().enumerate() {
                out.phi_minus[(j, k)] = v;
            }
        }
        let minus0 = out.trace_minus();
        let mut rhs = state.phi_0.clone();
        for (r, e) in rhs.iter_mut().zip(sys.embed(&minus0)) {
            *r += e;
        }
        out.phi_0 = ResolventSolver::new(&sys.hamiltonian, z)?.solve(&rhs)?;
        let coupled = sys.restrict(&out.phi_0);
        for j in 0..m {
            let start = minus0[j] + C64::i() * coupled[j];
            let col = sweep_forward(z, delta, start, |k| state.phi_plus[(j, k)], n);
            for (k, v) in col.into_iter().enumerate() {
                out.phi_plus[(j, k)] = v;
            }
        }
    } else {
        for j in 0..m {
            let col = sweep_backward(z, delta, ZERO, |k| state.phi_plus[(j, k)], n);
            for (k, v) in col.into_iter().enumerate() {
                out.phi_plus[(j, k)] = v;
            }
        }
        let plus0 = out.trace_plus();
        let mut rhs = state.phi_0.clone();
        for (r, e) in rhs.iter_mut().zip(sys.embed(&plus0)) {
            *r += e;
        }
        out.phi_0 = ResolventSolver::new(&sys.hamiltonian, z.conj())?.solve_adjoint(&rhs)?;
        let coupled = sys.restrict(&out.phi_0);
        for j in 0..m {
            let end = plus0[j] - C64::i() * coupled[j];
            let col = sweep_backward(z, delta, end, |k| state.phi_minus[(j, k)], n);
            for (k, v) in col.into_iter().enumerate() {
                out.phi_minus[(j, k)] = v;
            }
        }
    }
    Ok(out)
}

/// Channel inputs c·sin²(π(r − r₀)/L): smooth, vanishing with their derivative at both ends.
#[derive(Clone, Debug)]
pub struct SineProbe {
    pub c_minus: Vec<C64>,
    pub phi_0: Vec<C64>,
    pub c_plus: Vec<C64>,
}

impl SineProbe {
    pub fn random(sys: &DilationSystem, rng: &mut impl Rng, with_channels: bool) -> Self {
        let mut draw = |n: usize| -> Vec<C64> { (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect() };
        let phi_0 = draw(sys.interior_dim());
        let (c_minus, c_plus) = if with_channels {
            (draw(sys.channel_count()), draw(sys.channel_count()))
        } else {
            (vec![ZERO; sys.channel_count()], vec![ZERO; sys.channel_count()])
        };
        SineProbe { c_minus, phi_0, c_plus }
    }

    pub fn sample(&self, sys: &DilationSystem) -> DilationState {
        let n = sys.channel_points();
        let delta = sys.step();
        let l = sys.channel_length;
        let s2 = |k: usize| (PI * k as f64 * delta / l).sin().powi(2);
        DilationState {
            phi_minus: Mat::from_fn(sys.channel_count(), n, |j, k| self.c_minus[j] * s2(k)),
            phi_0: self.phi_0.clone(),
            phi_plus: Mat::from_fn(sys.channel_count(), n, |j, k| self.c_plus[j] * s2(k)),
        }
    }
}

/// ∫_lo^hi e^{iz(r−s)} e^{iβ(s−a)} ds
fn exp_integral(z: C64, r: f64, beta: f64, a: f64, lo: f64, hi: f64) -> C64 {
    let d = C64::i() * (beta - z);
    let pref = (C64::i() * z * r - C64::i() * beta * a).exp();
    pref * ((d * hi).exp() - (d * lo).exp()) / d
}

/// ∫_lo^hi e^{iz(r−s)} sin²(π(s−a)/L) ds
fn sine_integral(z: C64, r: f64, a: f64, l: f64, lo: f64, hi: f64) -> C64 {
    let kappa = 2.0 * PI / l;
    0.5 * exp_integral(z, r, 0.0, a, lo, hi) - 0.25 * exp_integral(z, r, kappa, a, lo, hi) - 0.25 * exp_integral(z, r, -kappa, a, lo, hi)
}

/// Closed-form (K − z)⁻¹ of a sine probe, sampled on the channel grids.
/// The interior solve is dense and independent of the banded solver.
pub fn exact_probe_resolvent(sys: &DilationSystem, z: C64, probe: &SineProbe) -> Result<DilationState> {
    let n = sys.channel_points();
    let delta = sys.step();
    let l = sys.channel_length;
    let m = sys.channel_count();
    let i = C64::i();
    let dense = sys.hamiltonian.to_dense();
    let dim = sys.interior_dim();
    let mut out = DilationState::zeros(sys);
    let solve = |a: Mat<C64>, rhs: Vec<C64>| -> Vec<C64> { linalg::dense_matvec(linalg::dense_inverse(a.as_ref()).as_ref(), &rhs) };
    let r_minus: Vec<f64> = (0..n).map(|k| -l + k as f64 * delta).collect();
    let r_plus: Vec<f64> = (0..n).map(|k| k as f64 * delta).collect();
    let wave = |r: f64| (i * z * r).exp();
    if z.im > 0.0 {
        let prof: Vec<C64> = r_minus.iter().map(|&r| i * sine_integral(z, r, -l, l, -l, r)).collect();
        out.phi_minus = Mat::from_fn(m, n, |j, k| probe.c_minus[j] * prof[k]);
        let minus0 = out.trace_minus();
        let mut rhs = probe.phi_0.clone();
        for (r, e) in rhs.iter_mut().zip(sys.embed(&minus0)) {
            *r += e;
        }
        out.phi_0 = solve(Mat::from_fn(dim, dim, |a, b| dense[(a, b)] - if a == b { z } else { ZERO }), rhs);
        let coupled = sys.restrict(&out.phi_0);
        let prof: Vec<C64> = r_plus.iter().map(|&r| i * sine_integral(z, r, 0.0, l, 0.0, r)).collect();
        let waves: Vec<C64> = r_plus.iter().map(|&r| wave(r)).collect();
        out.phi_plus = Mat::from_fn(m, n, |j, k| (minus0[j] + i * coupled[j]) * waves[k] + probe.c_plus[j] * prof[k]);
    } else {
        let prof: Vec<C64> = r_plus.iter().map(|&r| -i * sine_integral(z, r, 0.0, l, r, l)).collect();
        out.phi_plus = Mat::from_fn(m, n, |j, k| probe.c_plus[j] * prof[k]);
        let plus0 = out.trace_plus();
        let mut rhs = probe.phi_0.clone();
        for (r, e) in rhs.iter_mut().zip(sys.embed(&plus0)) {
            *r += e;
        }
        out.phi_0 = solve(Mat::from_fn(dim, dim, |a, b| dense[(b, a)].conj() - if a == b { z } else { ZERO }), rhs);
        let coupled = sys.restrict(&out.phi_0);
        let prof: Vec<C64> = r_minus.iter().map(|&r| -i * sine_integral(z, r, -l, l, r, 0.0)).collect();
        let waves: Vec<C64> = r_minus.iter().map(|&r| wave(r)).collect();
        out.phi_minus = Mat::from_fn(m, n, |j, k| (plus0[j] - i * coupled[j]) * waves[k] + probe.c_minus[j] * prof[k]);
    }
    Ok(out)
}

/// Relative residual of (K − z)Ψ = Φ: channel equations by central differences,
/// the interior row, and the jump condition.
pub fn resolvent_residual(sys: &DilationSystem, z: C64, psi: &DilationState, phi: &DilationState) -> (f64, f64) {
    let delta = sys.step();
    let n = sys.channel_points();
    let i = C64::i();
    let mut num = 0.0f64;
    for (p, f) in [(&psi.phi_minus, &phi.phi_minus), (&psi.phi_plus, &phi.phi_plus)] {
        for j in 0..p.nrows() {
            for k in 1..n - 1 {
                let d = (p[(j, k + 1)] - p[(j, k - 1)]) / (2.0 * delta);
                num = num.max((-i * d - z * p[(j, k)] - f[(j, k)]).norm());
            }
        }
    }
    let (minus0, plus0) = (psi.trace_minus(), psi.trace_plus());
    let avg: Vec<C64> = minus0.iter().zip(&plus0).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut row = sys.h1.apply(&psi.phi_0);
    for ((r, e), p) in row.iter_mut().zip(sys.embed(&avg)).zip(&psi.phi_0) {
        *r -= e + z * p;
    }
    let interior = linalg::norm(&linalg::sub(&row, &phi.phi_0));
    let coupled = sys.restrict(&psi.phi_0);
    let jump = (0..minus0.len()).map(|j| (plus0[j] - minus0[j] - i * coupled[j]).norm()).fold(0.0, f64::max);
    let scale = phi.norm(delta).max(f64::MIN_POSITIVE);
    ((num.max(interior) / scale), jump / scale.max(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventIdentityReport {
    /// interior probes: ‖Pψ − (H − z)⁻¹φ₀‖/‖(H − z)⁻¹φ₀‖, both half-planes
    pub max_error: f64,
    /// probes with channel input, full state against the closed form
    pub channel_error: f64,
    pub residual: f64,
    pub jump_residual: f64,
    pub truncation_bound: f64,
    pub probes: usize,
}

/// Checks P(K−z)⁻¹|_{L²} = (H−z)⁻¹ and P(K−z̄)⁻¹|_{L²} = (H*−z̄)⁻¹ for every z.
pub fn verify_resolvent_identity(sys: &DilationSystem, z_list: &[C64], probes: usize, seed: u64) -> Result<ResolventIdentityReport> {
    if let Some(z) = z_list.iter().find(|z| !(z.im > 0.0)) {
        return Err(Error::precondition("Im z must be positive", z.im));
    }
    let per_z: Vec<ResolventIdentityReport> = z_list
        .par_iter()
        .enumerate()
        .map(|(zi, &z)| -> Result<ResolventIdentityReport> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(zi as u64));
            let mut rep = ResolventIdentityReport { max_error: 0.0, channel_error: 0.0, residual: 0.0, jump_residual: 0.0, truncation_bound: 0.0, probes };
            for w in [z, z.conj()] {
                rep.truncation_bound = rep.truncation_bound.max(sys.check_truncation(w)?);
                let batch: Vec<(bool, SineProbe)> = (0..probes).map(|p| (p % 2 == 1, SineProbe::random(sys, &mut rng, p % 2 == 1))).collect();
                let results: Vec<(bool, f64, f64, f64)> = batch
                    .par_iter()
                    .map(|(with_channels, probe)| -> Result<(bool, f64, f64, f64)> {
                        let phi = probe.sample(sys);
                        let psi = dilation_resolvent(sys, w, &phi)?;
                        let exact = exact_probe_resolvent(sys, w, probe)?;
                        let err = if *with_channels {
                            psi.difference(&exact).norm(sys.step()) / exact.norm(sys.step())
                        } else {
                            linalg::norm(&linalg::sub(&psi.phi_0, &exact.phi_0)) / linalg::norm(&exact.phi_0)
                        };
                        let (res, jump) = resolvent_residual(sys, w, &psi, &phi);
                        Ok((*with_channels, err, res, jump))
                    })
                    .collect::<Result<_>>()?;
                for (with_channels, err, res, jump) in results {
                    if with_channels {
                        rep.channel_error = rep.channel_error.max(err);
                    } else {
                        rep.max_error = rep.max_error.max(err);
                    }
                    rep.residual = rep.residual.max(res);
                    rep.jump_residual = rep.jump_residual.max(jump);
                }
            }
            Ok(rep)
        })
        .collect::<Result<_>>()?;
    let mut out = ResolventIdentityReport { max_error: 0.0, channel_error: 0.0, residual: 0.0, jump_residual: 0.0, truncation_bound: 0.0, probes };
    for r in per_z {
        out.max_error = out.max_error.max(r.max_error);
        out.channel_error = out.channel_error.max(r.channel_error);
        out.residual = out.residual.max(r.residual);
        out.jump_residual = out.jump_residual.max(r.jump_residual);
        out.truncation_bound = out.truncation_bound.max(r.truncation_bound);
    }
    Ok(out)
}

/// Channel-quadrature refinement study: channel errors at spacing δ, δ/2, δ/4, …
pub fn refinement_study(sys: &DilationSystem, z: C64, levels: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    (0..levels)
        .map(|l| {
            let s = sys.with_spacing(sys.channel_spacing / 2f64.powi(l as i32));
            let rep = verify_resolvent_identity(&s, &[z], 2, seed)?;
            Ok((s.step(), rep.channel_error))
        })
        .collect()
}

/// Semigroup check through the channels in momentum representation: each fiber
/// becomes M modes k_m on a lattice of spacing π/L coupled to the interior with
/// strength −W·√(Δk/2π)·exp(−k²/2κ²), κ = k_max·cutoff_fraction. Errors are
/// removed by Richardson extrapolation over the levels M, 2M, 4M, ….
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupOptions {
    pub modes: usize,
    pub levels: usize,
    pub cutoff_fraction: f64,
    pub front_margin: f64,
    pub max_dim: usize,
}

impl Default for SemigroupOptions {
    fn default() -> Self {
        SemigroupOptions { modes: 250, levels: 4, cutoff_fraction: 1.0 / 6.0, front_margin: 0.05, max_dim: 6000 }
    }
}

/// Dense hermitian K with `modes` momentum modes per fiber.
pub fn momentum_dilation(sys: &DilationSystem, modes: usize, cutoff_fraction: f64) -> Mat<C64> {
    let n = sys.interior_dim();
    let m = sys.channel_count();
    let dk = PI / sys.channel_length;
    let ks: Vec<f64> = (0..modes).map(|i| (i as f64 - 0.5 * (modes as f64 - 1.0)) * dk).collect();
    let kappa = 0.5 * modes as f64 * dk * cutoff_fraction;
    let h1 = sys.h1.to_dense();
    let dim = n + m * modes;
    let mut k = Mat::<C64>::zeros(dim, dim);
    for a in 0..n {
        for b in 0..n {
            k[(a, b)] = h1[(a, b)];
        }
    }
    for (j, (&site, &w)) in sys.omega.iter().zip(&sys.w).enumerate() {
        for (q, &kq) in ks.iter().enumerate() {
            let idx = n + j * modes + q;
            k[(idx, idx)] = C64::from(kq);
            let g = C64::from(-w * (dk / (2.0 * PI)).sqrt() * (-kq * kq / (2.0 * kappa * kappa)).exp());
            k[(site, idx)] = g;
            k[(idx, site)] = g.conj();
        }
    }
    k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupReport {
    pub t_list: Vec<f64>,
    /// per t: max over probes of ‖P e^{−itK/h}φ₀ − e^{−itH/h}φ₀‖/‖φ₀‖
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// max hermitian defect of the assembled K
    pub hermitian_defect: f64,
    /// max |‖e^{−itK/h}Φ‖ − ‖Φ‖|
    pub norm_drift: f64,
    pub dims: Vec<usize>,
}

fn richardson(levels: &[Vec<C64>]) -> Vec<C64> {
    // error ~ Σ c_p 2^{−p·level}; repeated elimination with factor 2
    let mut table: Vec<Vec<C64>> = levels.to_vec();
    let mut factor = 2.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(fine, coarse)| (factor * fine - coarse) / (factor - 1.0)).collect())
            .collect();
        factor *= 2.0;
    }
    table.pop().unwrap()
}

pub fn verify_semigroup_dilation(sys: &DilationSystem, t_list: &[f64], probes: usize, seed: u64, opts: &SemigroupOptions) -> Result<SemigroupReport> {
    let limit = sys.channel_length * (1.0 - opts.front_margin);
    for &t in t_list {
        if t < 0.0 {
            return Err(Error::precondition("t must be nonnegative", t));
        }
        if t / sys.h >= limit {
            return Err(Error::FrontReachedBoundary { travel: t / sys.h, limit });
        }
    }
    let n = sys.interior_dim();
    let dims: Vec<usize> = (0..opts.levels).map(|l| n + sys.channel_count() * opts.modes * (1 << l)).collect();
    if let Some(&d) = dims.iter().find(|&&d| d > opts.max_dim) {
        return Err(Error::precondition("dilation dimension exceeds the cap", d as f64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<C64>> = (0..probes.max(1))
        .map(|_| {
            let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let nv = linalg::norm(&v);
            linalg::scale(&mut v, C64::from(1.0 / nv));
            v
        })
        .collect();

    let mut defect = 0.0f64;
    let mut drift = 0.0f64;
    // per level, per t, per probe: interior block
    let mut per_level: Vec<Vec<Vec<Vec<C64>>>> = Vec::new();
    for l in 0..opts.levels {
        let modes = opts.modes << l;
        let k = momentum_dilation(sys, modes, opts.cutoff_fraction);
        defect = defect.max(linalg::hermitian_defect(k.as_ref()));
        let (vals, vecs) = linalg::hermitian_eigen(k.as_ref())?;
        let dim = k.nrows();
        let mut rows = Vec::new();
        for &t in t_list {
            let phases: Vec<C64> = vals.iter().map(|v| C64::new(0.0, -t * v / sys.h).exp()).collect();
            let mut outs = Vec::new();
            for input in &inputs {
                let mut full = vec![ZERO; dim];
                full[..n].copy_from_slice(input);
                let mut c = vec![ZERO; dim];
                for (q, cq) in c.iter_mut().enumerate() {
                    let mut s = ZERO;
                    for a in 0..n {
                        s += vecs[(a, q)].conj() * full[a];
                    }
                    *cq = s * phases[q];
                }
                let evolved = linalg::dense_matvec(vecs.as_ref(), &c);
                drift = drift.max((linalg::norm(&evolved) - 1.0).abs());
                outs.push(evolved[..n].to_vec());
            }
            rows.push(outs);
        }
        per_level.push(rows);
    }

    let plan = PropagatorPlan { method: PropagationMethod::Eigendecomposition, dt_quantum: 1.0, t_final: 0.0, h: sys.h };
    let prop = Propagator::new(&sys.hamiltonian, &plan)?;
    let mut errors = Vec::new();
    for (ti, &t) in t_list.iter().enumerate() {
        let mut worst = 0.0f64;
        for (pi, input) in inputs.iter().enumerate() {
            let levels: Vec<Vec<C64>> = per_level.iter().map(|lv| lv[ti][pi].clone()).collect();
            let extrapolated = richardson(&levels);
            let reference = prop.apply(input, t)?;
            worst = worst.max(linalg::norm(&linalg::sub(&extrapolated, &reference)));
        }
        errors.push(worst);
    }
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    Ok(SemigroupReport { t_list: t_list.to_vec(), errors, max_error, hermitian_defect: defect, norm_drift: drift, dims })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_channels() {
        assert!(DilationSystem::scalar(1.0, 0.5, 1.0, 0.0, 0.1).is_err());
        assert!(DilationSystem::scalar(1.0, -0.5, 1.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let sys = DilationSystem::scalar(1.0, 0.5, 1.0, 2.0, 1e-2).unwrap();
        let st = DilationState::interior(&sys, vec![ONE_]);
        assert!(matches!(dilation_resolvent(&sys, C64::new(1.0, 0.5), &st), Err(Error::TruncationError { .. })));
    }

    const ONE_: C64 = C64::new(1.0, 0.0);

    #[test]
    fn interior_input_matches_scalar_resolvent() {
        let (l0, v, h) = (1.0, 0.5, 1.0);
        let sys = DilationSystem::scalar(l0, v, h, 40.0, 1e-2).unwrap();
        let z = C64::new(1.2, 0.5);
        let out = dilation_resolvent(&sys, z, &DilationState::interior(&sys, vec![ONE_])).unwrap();
        let exact = 1.0 / (C64::new(l0, -h * v) - z);
        assert!((out.phi_0[0] - exact).norm() < 1e-12);
        assert!(out.trace_minus()[0].norm() == 0.0);
        let jump = out.trace_plus()[0] - out.trace_minus()[0] - C64::i() * sys.w[0] * out.phi_0[0];
        assert!(jump.norm() < 1e-14);
        let adj = dilation_resolvent(&sys, z.conj(), &DilationState::interior(&sys, vec![ONE_])).unwrap();
        assert!((adj.phi_0[0] - 1.0 / (C64::new(l0, h * v) - z.conj())).norm() < 1e-12);
    }

    #[test]
    fn richardson_removes_geometric_terms() {
        let f = |m: f64| vec![C64::from(3.0 + 1.0 / m + 0.5 / (m * m))];
        let r = richardson(&[f(1.0), f(2.0), f(4.0)]);
        assert!((r[0].re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_model_is_hermitian() {
        let sys = DilationSystem::scalar(1.0, 0.5, 1.0, 2.0, 1e-2).unwrap();
        let k = momentum_dilation(&sys, 64, 1.0 / 6.0);
        assert!(linalg::hermitian_defect(k.as_ref()) == 0.0);
    }
}
