//! Contraction-semigroup propagation, Heisenberg observables, the damped
//! Egorov comparison and the smoothing time integral.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, energy, PhasePoint};
use crate::linalg::{self, BandLu, BandMatrix, C64, ONE};
use crate::potential::Potential;
use crate::quantize::{self, DiscreteOperator, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams, SpongeConfig, StencilOrder, Storage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    Eigendecomposition,
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorPlan {
    pub method: PropagationMethod,
    pub dt_quantum: f64,
    pub t_final: f64,
    pub h: f64,
}

pub const EIGEN_MAX_POINTS: usize = 2048;

impl PropagatorPlan {
    pub fn eigen(h: f64, t_final: f64) -> Self {
        PropagatorPlan { method: PropagationMethod::Eigendecomposition, dt_quantum: t_final.max(1e-3), t_final, h }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt_quantum > 0.0) {
            return Err(Error::precondition("dt_quantum must be positive", self.dt_quantum));
        }
        if self.method == PropagationMethod::Eigendecomposition && n > EIGEN_MAX_POINTS {
            return Err(Error::precondition("eigendecomposition is capped at 2048 points", n as f64));
        }
        Ok(())
    }
}

enum Engine {
    Eigen(linalg::GeneralEigen),
    Midpoint { lhs: BandLu, rhs: BandMatrix },
}

/// Prepared e^{−itH/h}.
pub struct Propagator {
    h: f64,
    dt: f64,
    engine: Engine,
}

impl Propagator {
    pub fn new(op: &DiscreteOperator, plan: &PropagatorPlan) -> Result<Self> {
        plan.validate(op.dim())?;
        let engine = match plan.method {
            PropagationMethod::Eigendecomposition => Engine::Eigen(linalg::general_eigen(op.to_dense().as_ref())?),
            PropagationMethod::ImplicitMidpoint => {
                let Storage::Banded(b) = &op.storage else {
                    return Err(Error::precondition("implicit midpoint needs a banded operator", 0.0));
                };
                let c = C64::new(0.0, 0.5 * plan.dt_quantum / plan.h);
                let mut lhs = b.scaled(c);
                lhs.add_diagonal(&vec![ONE; b.dim()]);
                let mut rhs = b.scaled(-c);
                rhs.add_diagonal(&vec![ONE; b.dim()]);
                Engine::Midpoint { lhs: lhs.lu()?, rhs }
            }
        };
        Ok(Propagator { h: plan.h, dt: plan.dt_quantum, engine })
    }

    /// Number of midpoint steps for time t (t must be a multiple of dt).
    fn steps(&self, t: f64) -> Result<usize> {
        let k = t / self.dt;
        let n = k.round();
        if (k - n).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::precondition("t must be a multiple of dt_quantum", t));
        }
        Ok(n as usize)
    }

    pub fn apply(&self, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        if t < 0.0 {
            return Err(Error::precondition("propagation time must be nonnegative", t));
        }
        if t == 0.0 {
            return Ok(psi.to_vec());
        }
        match &self.engine {
            Engine::Eigen(e) => {
                let c = linalg::dense_matvec(e.inverse.as_ref(), psi);
                let phased: Vec<C64> = c
                    .iter()
                    .zip(&e.values)
                    .map(|(ci, l)| ci * (C64::new(0.0, -t / self.h) * l).exp())
                    .collect();
                Ok(linalg::dense_matvec(e.vectors.as_ref(), &phased))
            }
            Engine::Midpoint { lhs, rhs } => {
                let mut u = psi.to_vec();
                for _ in 0..self.steps(t)? {
                    u = rhs.matvec(&u);
                    lhs.solve_in_place(&mut u);
                }
                Ok(u)
            }
        }
    }

    /// U(t) applied to every column of `m`.
    pub fn apply_matrix(&self, m: &Mat<C64>, t: f64) -> Result<Mat<C64>> {
        match &self.engine {
            Engine::Eigen(e) => {
                let phases: Vec<C64> = e.values.iter().map(|l| (C64::new(0.0, -t / self.h) * l).exp()).collect();
                let c = &e.inverse * m;
                let c = Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * phases[i]);
                Ok(&e.vectors * c)
            }
            Engine::Midpoint { .. } => {
                let cols: Vec<Vec<C64>> = (0..m.ncols())
                    .into_par_iter()
                    .map(|j| self.apply(&linalg::column(m.as_ref(), j), t))
                    .collect::<Result<_>>()?;
                Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| cols[j][i]))
            }
        }
    }
}

/// ψ_t = e^{−itH/h}ψ₀ with t = plan.t_final.
pub fn propagate(op: &DiscreteOperator, plan: &PropagatorPlan, psi0: &[C64]) -> Result<Vec<C64>> {
    Propagator::new(op, plan)?.apply(psi0, plan.t_final)
}

/// U(t)* Op(a) U(t) as a dense matrix.
pub fn heisenberg(op: &DiscreteOperator, grid: &Grid, plan: &PropagatorPlan, symbol: &quantize::Symbol, t: f64) -> Result<Mat<C64>> {
    let a = quantize::weyl_quantize(grid, symbol, plan.h)?.to_dense();
    let u = Propagator::new(op, plan)?.apply_matrix(&Mat::<C64>::identity(op.dim(), op.dim()), t)?;
    Ok(u.adjoint() * (&a * &u))
}

/// Phase-space symbols used by the Egorov comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSymbol {
    /// exp(−((x−x₀)² + (ξ−ξ₀)²)/(2σ²))
    Gaussian { x0: f64, xi0: f64, sigma: f64 },
    /// a = x
    Position,
    /// a = 1
    Unit,
}

impl PhaseSymbol {
    pub fn parse(spec: &str, key: &str) -> Result<PhaseSymbol> {
        let s = spec.trim();
        match s {
            "x" | "position" => return Ok(PhaseSymbol::Position),
            "one" | "unit" => return Ok(PhaseSymbol::Unit),
            "gaussian" => return Ok(PhaseSymbol::Gaussian { x0: 0.2, xi0: 0.3, sigma: 0.25 }),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("gaussian(").and_then(|r| r.strip_suffix(')')) {
            let v: Vec<f64> = inner
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| Error::config(key, format!("`{p}` is not a number"))))
                .collect::<Result<_>>()?;
            if let [x0, xi0, sigma] = v[..] {
                return Ok(PhaseSymbol::Gaussian { x0, xi0, sigma });
            }
        }
        Err(Error::config(key, format!("unknown symbol `{s}` (expected gaussian(x0,xi0,sigma), x or one)")))
    }

    pub fn eval(&self, w: PhasePoint) -> f64 {
        match *self {
            PhaseSymbol::Gaussian { x0, xi0, sigma } => {
                (-((w.x - x0).powi(2) + (w.xi - xi0).powi(2)) / (2.0 * sigma * sigma)).exp()
            }
            PhaseSymbol::Position => w.x,
            PhaseSymbol::Unit => 1.0,
        }
    }

    fn decays(&self) -> bool {
        matches!(self, PhaseSymbol::Gaussian { .. })
    }

    pub fn to_symbol(self) -> quantize::Symbol {
        match self {
            PhaseSymbol::Position => quantize::Symbol::position(),
            PhaseSymbol::Unit => quantize::Symbol::Polynomial { name: "1".into(), c0: Some(std::sync::Arc::new(|_| 1.0)), c1: None, c2: None },
            other => quantize::Symbol::function(format!("{other:?}"), move |x, xi| other.eval(PhasePoint::new(x, xi))),
        }
    }

    /// Energy range outside which the symbol is below 1e−16 relative.
    fn energy_window(&self, pot: &Potential) -> Option<(f64, f64)> {
        match *self {
            PhaseSymbol::Gaussian { x0, xi0, sigma } => {
                let r = sigma * (2.0 * 16.0 * std::f64::consts::LN_10).sqrt();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..=200 {
                    for j in 0..=200 {
                        let dx = -r + 2.0 * r * i as f64 / 200.0;
                        let dxi = -r + 2.0 * r * j as f64 / 200.0;
                        if dx * dx + dxi * dxi <= r * r {
                            let e = energy(PhasePoint::new(x0 + dx, xi0 + dxi), pot);
                            lo = lo.min(e);
                            hi = hi.max(e);
                        }
                    }
                }
                let pad = 0.02 * (hi - lo).max(1e-3);
                Some((lo - pad, hi + pad))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgorovSetup {
    pub potential: Potential,
    pub grid: Grid,
    pub flow_dt: f64,
    /// coherent-state centers cover [−x, x] × [−ξ, ξ]
    pub test_x: f64,
    pub test_xi: f64,
    /// singular values of the coherent-state frame kept above this fraction
    pub frame_threshold: f64,
}

impl EgorovSetup {
    pub fn standard(potential: Potential) -> Self {
        EgorovSetup {
            potential,
            grid: Grid { x_min: -5.0, x_max: 5.0, n_points: 512 },
            flow_dt: 0.01,
            test_x: 1.5,
            test_xi: 1.0,
            frame_threshold: 0.1,
        }
    }

    /// H₁ and H = H₁ − ihV₂ with the periodic spectral Laplacian and no sponge.
    pub fn hamiltonians(&self, h: f64) -> Result<(DiscreteOperator, DiscreteOperator)> {
        let params = SemiclassicalParams::new(h, NuLaw::Linear)?;
        let cfg = HamiltonianConfig { stencil: StencilOrder::Spectral, sponge: None, e_max: None };
        quantize::build_hamiltonian(&self.grid, &self.potential, &params, &cfg)
    }
}

/// Unit coherent state centred at (x₀, ξ₀).
pub fn coherent_state(grid: &Grid, h: f64, x0: f64, xi0: f64) -> Vec<C64> {
    let mut v: Vec<C64> = grid
        .nodes()
        .iter()
        .map(|x| C64::from_polar((-(x - x0).powi(2) / (2.0 * h)).exp(), xi0 * x / h))
        .collect();
    let nv = linalg::norm(&v);
    linalg::scale(&mut v, C64::from(1.0 / nv));
    v
}

/// Unit Gaussian packet of position width σ and mean momentum ξ₀.
pub fn wave_packet(grid: &Grid, h: f64, x0: f64, xi0: f64, width: f64) -> Vec<C64> {
    let mut v: Vec<C64> = grid
        .nodes()
        .iter()
        .map(|x| C64::from_polar((-(x - x0).powi(2) / (2.0 * width * width)).exp(), xi0 * x / h))
        .collect();
    let nv = linalg::norm(&v);
    linalg::scale(&mut v, C64::from(1.0 / nv));
    v
}

/// Orthonormal basis of the span of coherent states on a √(πh) lattice.
pub fn test_subspace(setup: &EgorovSetup, h: f64) -> Result<Mat<C64>> {
    let step = (std::f64::consts::PI * h).sqrt();
    let nx = (2.0 * setup.test_x / step).floor() as i64;
    let nxi = (2.0 * setup.test_xi / step).floor() as i64;
    let mut cols = Vec::new();
    for i in 0..=nx {
        for j in 0..=nxi {
            let x0 = -setup.test_x + (2.0 * setup.test_x - nx as f64 * step) / 2.0 + i as f64 * step;
            let xi0 = -setup.test_xi + (2.0 * setup.test_xi - nxi as f64 * step) / 2.0 + j as f64 * step;
            cols.push(coherent_state(&setup.grid, h, x0, xi0));
        }
    }
    let n = setup.grid.n_points;
    let frame = Mat::from_fn(n, cols.len(), |r, c| cols[c][r]);
    let svd = frame.thin_svd().map_err(|e| Error::DiagonalizationFailed(format!("{e:?}")))?;
    let s = svd.S();
    let k = cols.len().min(n);
    let smax = (0..k).map(|i| s[i].re).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..k).filter(|&i| s[i].re > setup.frame_threshold * smax).collect();
    let u = svd.U();
    Ok(Mat::from_fn(n, keep.len(), |r, c| u[(r, keep[c])]))
}

/// Op((a∘φᵗ)·q^{power}) where power = 1 uses q and power = ½ uses q₁.
pub fn classical_observable(setup: &EgorovSetup, symbol: &PhaseSymbol, t: f64, h: f64, damping_factor: f64) -> Result<Mat<C64>> {
    let pot = &setup.potential;
    let window = symbol.energy_window(pot);
    let dt = setup.flow_dt;
    let eval = |m: f64, xis: &[f64]| -> Vec<f64> {
        xis.iter()
            .map(|&xi| {
                let w = PhasePoint::new(m, xi);
                if let Some((lo, hi)) = window {
                    let e = energy(w, pot);
                    if e < lo || e > hi {
                        return 0.0;
                    }
                }
                match flow::flow_with_damping(w, t, pot, dt) {
                    Ok((end, integral)) => symbol.eval(end) * (-damping_factor * integral).exp(),
                    Err(_) => f64::NAN,
                }
            })
            .collect()
    };
    let m = quantize::weyl_quantize_table(&setup.grid, h, &eval, symbol.decays())?;
    if linalg::max_abs(m.as_ref()).is_nan() {
        return Err(Error::StepBlowup { t });
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgorovRow {
    pub h: f64,
    pub error: f64,
    pub mixed_error: f64,
    pub test_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgorovTable {
    pub t: f64,
    pub rows: Vec<EgorovRow>,
    /// slope of log E against log h
    pub slope: f64,
    pub mixed_slope: f64,
}


/// E(h) = ‖Q*(U*Op(a)U − Op((a∘φᵗ)q))Q‖ and the mixed variant with U₁ and q₁.
pub fn egorov_error(setup: &EgorovSetup, symbol: &PhaseSymbol, t: f64, h: f64) -> Result<EgorovRow> {
    let (h1, op) = setup.hamiltonians(h)?;
    let q = test_subspace(setup, h)?;
    let plan = PropagatorPlan::eigen(h, t);
    let a = quantize::weyl_quantize(&setup.grid, &symbol.to_symbol(), h)?.to_dense();
    let uq = Propagator::new(&op, &plan)?.apply_matrix(&q, t)?;
    let (vals, vecs) = linalg::hermitian_eigen(h1.to_dense().as_ref())?;
    let phases: Vec<C64> = vals.iter().map(|l| C64::new(0.0, -t * l / h).exp()).collect();
    let c = vecs.adjoint() * &q;
    let u1q = &vecs * Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * phases[i]);

    let heis = uq.adjoint() * (&a * &uq);
    let mixed = u1q.adjoint() * (&a * &uq);
    let b = classical_observable(setup, symbol, t, h, 2.0)?;
    let b1 = classical_observable(setup, symbol, t, h, 1.0)?;
    let qbq = q.adjoint() * (&b * &q);
    let qb1q = q.adjoint() * (&b1 * &q);
    let error = linalg::spectral_norm((&heis - &qbq).as_ref())?;
    let mixed_error = linalg::spectral_norm((&mixed - &qb1q).as_ref())?;
    Ok(EgorovRow { h, error, mixed_error, test_dim: q.ncols() })
}

pub fn egorov_compare(setup: &EgorovSetup, symbol: &PhaseSymbol, t: f64, h_list: &[f64]) -> Result<EgorovTable> {
    if t < 0.0 {
        return Err(Error::precondition("t must be nonnegative", t));
    }
    let rows: Vec<EgorovRow> = h_list.iter().map(|&h| egorov_error(setup, symbol, t, h)).collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let fit = |v: Vec<f64>| if rows.len() >= 2 { linalg::linear_fit(&x, &v).0 } else { f64::NAN };
    let slope = fit(rows.iter().map(|r| r.error.max(1e-300).ln()).collect());
    let mixed_slope = fit(rows.iter().map(|r| r.mixed_error.max(1e-300).ln()).collect());
    Ok(EgorovTable { t, rows, slope, mixed_slope })
}

/// Smooth window supported in [a, b], equal to 1 on [a + ramp, b − ramp].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiWindow {
    pub a: f64,
    pub b: f64,
    pub ramp: f64,
}

fn smooth_step(t: f64) -> f64 {
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        f(t) / (f(t) + f(1.0 - t))
    }
}

impl ChiWindow {
    pub fn new(a: f64, b: f64) -> Self {
        ChiWindow { a, b, ramp: 0.25 * (b - a) }
    }

    pub fn eval(&self, e: f64) -> f64 {
        smooth_step((e - self.a) / self.ramp) * smooth_step((self.b - e) / self.ramp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSetup {
    pub potential: Potential,
    pub grid: Grid,
    pub stencil: StencilOrder,
    pub sponge: SpongeConfig,
    pub nu_law: NuLaw,
    /// time step in units of h
    pub dt_over_h: f64,
    pub sample_dt: f64,
    pub tail_threshold: f64,
}

impl SmoothingSetup {
    pub fn standard(potential: Potential) -> Self {
        SmoothingSetup {
            potential,
            grid: Grid { x_min: -8.0, x_max: 8.0, n_points: 2048 },
            stencil: StencilOrder::Fourth,
            sponge: SpongeConfig { strength: 1.0, width_fraction: 0.35 },
            nu_law: NuLaw::Linear,
            dt_over_h: 0.05,
            sample_dt: 0.02,
            tail_threshold: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingValue {
    pub h: f64,
    pub value: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub values: Vec<SmoothingValue>,
    pub ratio: f64,
}

/// ∫₀ᵀ ‖⟨x⟩⁻ˢχ(H₁)U(t)ψ‖² dt for one h; ψ is given per h by `psi0`.
pub fn smoothing_value(setup: &SmoothingSetup, chi: &ChiWindow, s: f64, psi0: &[C64], t_end: f64, h: f64) -> Result<SmoothingValue> {
    let params = SemiclassicalParams::new(h, setup.nu_law.clone())?;
    let cfg = HamiltonianConfig { stencil: setup.stencil, sponge: Some(setup.sponge), e_max: None };
    let (h1, op) = quantize::build_hamiltonian(&setup.grid, &setup.potential, &params, &cfg)?;
    let (vals, vecs) = linalg::hermitian_eigen(h1.to_dense().as_ref())?;
    let chis: Vec<f64> = vals.iter().map(|l| chi.eval(*l)).collect();
    let active: Vec<usize> = (0..vals.len()).filter(|&k| chis[k] != 0.0).collect();
    let w = quantize::weights(&setup.grid, s);
    let n = setup.grid.n_points;
    // ⟨x⟩⁻ˢχ(H₁) = (W V_act χ) V_act*
    let left = Mat::from_fn(n, active.len(), |i, k| vecs[(i, active[k])] * (w[i] * chis[active[k]]));
    let right = Mat::from_fn(active.len(), n, |k, j| vecs[(j, active[k])].conj());
    let integrand = |psi: &[C64]| -> f64 {
        let c = linalg::dense_matvec(right.as_ref(), psi);
        linalg::norm(&linalg::dense_matvec(left.as_ref(), &c)).powi(2)
    };
    let dt = setup.dt_over_h * h;
    let per_sample = (setup.sample_dt / dt).round().max(1.0) as usize;
    let dt = setup.sample_dt / per_sample as f64;
    let samples = (t_end / setup.sample_dt).round() as usize;
    let plan = PropagatorPlan { method: PropagationMethod::ImplicitMidpoint, dt_quantum: dt, t_final: t_end, h };
    let prop = Propagator::new(&op, &plan)?;
    let mut psi = psi0.to_vec();
    let mut values = Vec::with_capacity(samples + 1);
    values.push(integrand(&psi));
    for _ in 0..samples {
        psi = prop.apply(&psi, per_sample as f64 * dt)?;
        values.push(integrand(&psi));
    }
    let tail = *values.last().unwrap();
    let norm2 = linalg::norm(psi0).powi(2);
    if tail > setup.tail_threshold * norm2.max(f64::MIN_POSITIVE) {
        return Err(Error::TailNotNegligible { t: t_end, value: tail, threshold: setup.tail_threshold });
    }
    Ok(SmoothingValue { h, value: linalg::simpson(&values, setup.sample_dt), tail })
}

pub fn smoothing_integral(
    setup: &SmoothingSetup,
    chi: &ChiWindow,
    s: f64,
    psi0: &(dyn Fn(&Grid, f64) -> Vec<C64> + Sync),
    t_end: f64,
    h_list: &[f64],
) -> Result<SmoothingReport> {
    let values: Vec<SmoothingValue> = h_list
        .par_iter()
        .map(|&h| smoothing_value(setup, chi, s, &psi0(&setup.grid, h), t_end, h))
        .collect::<Result<_>>()?;
    let max = values.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    Ok(SmoothingReport { ratio: max / min, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{DampingShape, PotentialShape};

    fn small_free(damping: DampingShape) -> (Grid, DiscreteOperator) {
        let g = Grid::new(-5.0, 5.0, 128).unwrap();
        let p = SemiclassicalParams::new(0.25, NuLaw::Linear).unwrap();
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (_, h) = quantize::build_hamiltonian(&g, &Potential::free().with_damping(damping), &p, &cfg).unwrap();
        (g, h)
    }

    #[test]
    fn zero_time_is_identity() {
        let (g, h) = small_free(DampingShape::None);
        let psi = coherent_state(&g, 0.25, 0.0, 1.0);
        let out = propagate(&h, &PropagatorPlan::eigen(0.25, 0.0), &psi).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn unitary_without_damping() {
        let (g, h) = small_free(DampingShape::None);
        let psi = coherent_state(&g, 0.25, 0.0, 1.0);
        let out = propagate(&h, &PropagatorPlan::eigen(0.25, 1.3), &psi).unwrap();
        assert!((linalg::norm(&out) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_damping_decays_exactly() {
        let (g, h) = small_free(DampingShape::Constant { value: 0.7 });
        let psi = coherent_state(&g, 0.25, 0.0, 1.0);
        let out = propagate(&h, &PropagatorPlan::eigen(0.25, 1.0), &psi).unwrap();
        assert!((linalg::norm(&out) - (-0.7f64).exp()).abs() < 1e-8);
        let mid = PropagatorPlan { method: PropagationMethod::ImplicitMidpoint, dt_quantum: 0.01, t_final: 1.0, h: 0.25 };
        let out2 = propagate(&h, &mid, &psi).unwrap();
        assert!((linalg::norm(&out2) - (-0.7f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn semigroup_property() {
        let pot = Potential::new(PotentialShape::GaussianBump { amplitude: -1.0, width: 1.0 }, DampingShape::WellCentered { amplitude: 1.0, width: 0.75 });
        let g = Grid::new(-5.0, 5.0, 128).unwrap();
        let p = SemiclassicalParams::new(0.25, NuLaw::Linear).unwrap();
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (_, h) = quantize::build_hamiltonian(&g, &pot, &p, &cfg).unwrap();
        let prop = Propagator::new(&h, &PropagatorPlan::eigen(0.25, 1.0)).unwrap();
        let psi = coherent_state(&g, 0.25, 0.3, 0.5);
        let a = prop.apply(&prop.apply(&psi, 0.4).unwrap(), 0.7).unwrap();
        let b = prop.apply(&psi, 1.1).unwrap();
        assert!(linalg::norm(&linalg::sub(&a, &b)) < 1e-8);
        let n1 = linalg::norm(&prop.apply(&psi, 0.4).unwrap());
        let n2 = linalg::norm(&b);
        assert!(n2 <= n1 && n1 <= 1.0 + 1e-12);
    }

    #[test]
    fn heisenberg_of_unit_symbol_is_identity_without_damping() {
        let (g, h) = small_free(DampingShape::None);
        let m = heisenberg(&h, &g, &PropagatorPlan::eigen(0.25, 1.0), &quantize::Symbol::function("one", |_, _| 1.0), 0.0);
        // the constant symbol does not decay in ξ; it is quantized through the diagonal rule instead
        assert!(m.is_err());
        let one = quantize::Symbol::Polynomial { name: "1".into(), c0: Some(std::sync::Arc::new(|_| 1.0)), c1: None, c2: None };
        let m = heisenberg(&h, &g, &PropagatorPlan::eigen(0.25, 1.0), &one, 1.0).unwrap();
        let eye = Mat::<C64>::identity(128, 128);
        assert!(linalg::max_abs((&m - &eye).as_ref()) < 1e-10);
    }

    #[test]
    fn egorov_vanishes_at_time_zero() {
        let pot = Potential::new(PotentialShape::GaussianBump { amplitude: -1.0, width: 1.0 }, DampingShape::WellCentered { amplitude: 1.0, width: 0.75 });
        let mut setup = EgorovSetup::standard(pot);
        setup.grid.n_points = 256;
        let row = egorov_error(&setup, &PhaseSymbol::parse("gaussian", "k").unwrap(), 0.0, 0.125).unwrap();
        assert!(row.error < 1e-12 && row.mixed_error < 1e-12, "{row:?}");
    }

    #[test]
    fn chi_window_support() {
        let chi = ChiWindow::new(0.5, 1.5);
        assert_eq!(chi.eval(0.4), 0.0);
        assert_eq!(chi.eval(0.8), 1.0);
        assert!(chi.eval(0.6) > 0.0 && chi.eval(0.6) < 1.0);
        assert_eq!(chi.eval(1.0), 1.0);
        assert_eq!(chi.eval(1.6), 0.0);
    }
}
