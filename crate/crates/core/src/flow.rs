//! Hamiltonian flow of p(x, ξ) = ξ² + V₁(x), orbit classification and the
//! damping integrals q, q₁.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::simpson;
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub xi: f64,
}

impl PhasePoint {
    pub fn new(x: f64, xi: f64) -> Self {
        PhasePoint { x, xi }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.xi.is_finite()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.x - other.x).hypot(self.xi - other.xi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub dt: f64,
    pub t_max: f64,
    pub r_escape: f64,
    pub tol_energy: f64,
    pub v2_threshold: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { dt: 1e-3, t_max: 50.0, r_escape: 10.0, tol_energy: 1e-8, v2_threshold: 1e-8 }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("t_max", self.t_max), ("r_escape", self.r_escape)] {
            if !(v > 0.0) {
                return Err(Error::precondition(format!("flow parameter {name} must be positive"), v));
            }
        }
        Ok(())
    }
}

const OVERFLOW_GUARD: f64 = 1e12;

pub fn energy(w: PhasePoint, pot: &Potential) -> f64 {
    w.xi * w.xi + pot.v1(w.x)
}

/// {p, x·ξ}(w) = 2ξ² − x·∇V₁(x)
pub fn virial_bracket(w: PhasePoint, pot: &Potential) -> f64 {
    2.0 * w.xi * w.xi - w.x * pot.grad_v1(w.x)
}

/// Newton projection onto the shell p = e along ∇p.
pub fn project_to_shell(w: PhasePoint, pot: &Potential, e: f64) -> Result<PhasePoint> {
    let mut w = w;
    for _ in 0..50 {
        let r = energy(w, pot) - e;
        if r.abs() <= 1e-14 * e.abs().max(1.0) {
            return Ok(w);
        }
        let (gx, gxi) = (pot.grad_v1(w.x), 2.0 * w.xi);
        let g2 = gx * gx + gxi * gxi;
        if g2 == 0.0 {
            return Err(Error::EmptyShell(format!("critical point at x = {}", w.x)));
        }
        w.x -= r * gx / g2;
        w.xi -= r * gxi / g2;
    }
    Err(Error::NoConvergence("shell projection".into()))
}

// Forest–Ruth type 4th order coefficients (Omelyan, Mryglod, Folk).
const PEFRL_XI: f64 = 0.178_617_895_844_809_1;
const PEFRL_LAMBDA: f64 = -0.212_341_831_062_605_4;
const PEFRL_CHI: f64 = -0.066_264_582_669_818_49;

/// One symplectic step of size dt (negative dt runs backward).
pub fn step(w: PhasePoint, pot: &Potential, dt: f64) -> PhasePoint {
    let (mut x, mut xi) = (w.x, w.xi);
    let drift = |x: &mut f64, xi: f64, c: f64| *x += c * dt * 2.0 * xi;
    let kick = |xi: &mut f64, x: f64, c: f64| *xi -= c * dt * pot.grad_v1(x);
    drift(&mut x, xi, PEFRL_XI);
    kick(&mut xi, x, 0.5 * (1.0 - 2.0 * PEFRL_LAMBDA));
    drift(&mut x, xi, PEFRL_CHI);
    kick(&mut xi, x, PEFRL_LAMBDA);
    drift(&mut x, xi, 1.0 - 2.0 * (PEFRL_CHI + PEFRL_XI));
    kick(&mut xi, x, PEFRL_LAMBDA);
    drift(&mut x, xi, PEFRL_CHI);
    kick(&mut xi, x, 0.5 * (1.0 - 2.0 * PEFRL_LAMBDA));
    drift(&mut x, xi, PEFRL_XI);
    PhasePoint { x, xi }
}

/// φᵗ(w), with the step shrunk so that it divides t.
pub fn flow_map(w: PhasePoint, t: f64, pot: &Potential, dt: f64) -> Result<PhasePoint> {
    if t == 0.0 {
        return Ok(w);
    }
    let n = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut w = w;
    for k in 0..n {
        w = step(w, pot, h);
        if !w.is_finite() || w.x.abs() > OVERFLOW_GUARD || w.xi.abs() > OVERFLOW_GUARD {
            return Err(Error::StepBlowup { t: (k + 1) as f64 * h });
        }
    }
    Ok(w)
}

/// φᵗ(w) together with ∫ V₂ over the traversed time interval (always ≥ 0).
pub fn flow_with_damping(w: PhasePoint, t: f64, pot: &Potential, dt: f64) -> Result<(PhasePoint, f64)> {
    if t == 0.0 {
        return Ok((w, 0.0));
    }
    let n = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut w = w;
    let mut vals = Vec::with_capacity(n + 1);
    vals.push(pot.v2(w.x));
    for k in 0..n {
        w = step(w, pot, h);
        if !w.is_finite() || w.x.abs() > OVERFLOW_GUARD || w.xi.abs() > OVERFLOW_GUARD {
            return Err(Error::StepBlowup { t: (k + 1) as f64 * h });
        }
        vals.push(pot.v2(w.x));
    }
    Ok((w, simpson(&vals, h.abs())))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub energy0: f64,
    pub q_values: Vec<f64>,
    pub q1_values: Vec<f64>,
    pub bounded_future: bool,
    pub bounded_past: bool,
    pub meets_o: bool,
    pub min_v2_along: f64,
    pub max_energy_drift: f64,
}

fn run_direction(w0: PhasePoint, pot: &Potential, dt: f64, n: usize) -> Result<Vec<PhasePoint>> {
    let mut pts = Vec::with_capacity(n + 1);
    let mut w = w0;
    pts.push(w);
    for k in 0..n {
        w = step(w, pot, dt);
        if !w.is_finite() || w.x.abs() > OVERFLOW_GUARD || w.xi.abs() > OVERFLOW_GUARD {
            return Err(Error::StepBlowup { t: (k + 1) as f64 * dt });
        }
        pts.push(w);
    }
    Ok(pts)
}

/// Cumulative trapezoid of V₂ along samples, starting at 0.
fn cumulative_v2(pts: &[PhasePoint], pot: &Potential, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..pts.len() {
        acc += 0.5 * dt * (pot.v2(pts[k - 1].x) + pot.v2(pts[k].x));
        out.push(acc);
    }
    out
}

/// Integrates over [−t_max, t_max] on a uniform grid with step dt.
pub fn integrate_flow(w0: PhasePoint, pot: &Potential, params: &FlowParams) -> Result<Trajectory> {
    params.validate()?;
    let n = (params.t_max / params.dt).round().max(1.0) as usize;
    let dt = params.t_max / n as f64;
    let fwd = run_direction(w0, pot, dt, n)?;
    let bwd = run_direction(w0, pot, -dt, n)?;
    let i_fwd = cumulative_v2(&fwd, pot, dt);
    let i_bwd = cumulative_v2(&bwd, pot, dt);

    let mut times = Vec::with_capacity(2 * n + 1);
    let mut points = Vec::with_capacity(2 * n + 1);
    let mut integrals = Vec::with_capacity(2 * n + 1);
    for k in (1..=n).rev() {
        times.push(-(k as f64) * dt);
        points.push(bwd[k]);
        integrals.push(i_bwd[k]);
    }
    for k in 0..=n {
        times.push(k as f64 * dt);
        points.push(fwd[k]);
        integrals.push(i_fwd[k]);
    }
    let energy0 = energy(w0, pot);
    let drift = points.iter().map(|p| (energy(*p, pot) - energy0).abs()).fold(0.0, f64::max);
    if drift > params.tol_energy {
        return Err(Error::ToleranceExceeded { what: "energy drift".into(), measured: drift, tol: params.tol_energy });
    }
    let q_values: Vec<f64> = integrals.iter().map(|i| (-2.0 * i).exp()).collect();
    let q1_values: Vec<f64> = integrals.iter().map(|i| (-i).exp()).collect();
    let bounded_future = fwd.iter().all(|p| p.x.abs() <= params.r_escape);
    let bounded_past = bwd.iter().all(|p| p.x.abs() <= params.r_escape);
    let v2s = points.iter().map(|p| pot.v2(p.x));
    let (mn, mx) = v2s.fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    Ok(Trajectory {
        times,
        points,
        energy0,
        q_values,
        q1_values,
        bounded_future,
        bounded_past,
        meets_o: mx > params.v2_threshold,
        min_v2_along: mn,
        max_energy_drift: drift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Boundedness {
    Escaped { at: f64 },
    BoundedUpTo { horizon: f64 },
}

impl Boundedness {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Boundedness::BoundedUpTo { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub future: Boundedness,
    pub past: Boundedness,
    pub meets_o: bool,
    pub min_v2_along: f64,
    pub max_v2_along: f64,
    /// ∫ V₂ over the retained orbit (both directions).
    pub v2_integral: f64,
}

impl Classification {
    pub fn bounded_future(&self) -> bool {
        self.future.is_bounded()
    }
    pub fn bounded_past(&self) -> bool {
        self.past.is_bounded()
    }
}

struct HalfOrbit {
    status: Boundedness,
    min_v2: f64,
    max_v2: f64,
    integral: f64,
}

fn classify_direction(w0: PhasePoint, pot: &Potential, p: &FlowParams, sign: f64) -> Result<HalfOrbit> {
    let n = (p.t_max / p.dt).round().max(1.0) as usize;
    let dt = sign * p.t_max / n as f64;
    let mut w = w0;
    let mut v = pot.v2(w.x);
    let (mut mn, mut mx, mut integral) = (v, v, 0.0);
    for k in 0..n {
        w = step(w, pot, dt);
        if !w.is_finite() || w.x.abs() > OVERFLOW_GUARD || w.xi.abs() > OVERFLOW_GUARD {
            return Err(Error::StepBlowup { t: (k + 1) as f64 * dt });
        }
        let v_new = pot.v2(w.x);
        integral += 0.5 * dt.abs() * (v + v_new);
        v = v_new;
        mn = mn.min(v);
        mx = mx.max(v);
        if w.x.abs() > p.r_escape {
            return Ok(HalfOrbit { status: Boundedness::Escaped { at: (k + 1) as f64 * dt }, min_v2: mn, max_v2: mx, integral });
        }
    }
    if w.x.abs() > 0.5 * p.r_escape {
        return Err(Error::Undetermined { horizon: p.t_max, radius: w.x.abs() });
    }
    Ok(HalfOrbit { status: Boundedness::BoundedUpTo { horizon: p.t_max }, min_v2: mn, max_v2: mx, integral })
}

pub fn classify_trajectory(w0: PhasePoint, pot: &Potential, params: &FlowParams) -> Result<Classification> {
    params.validate()?;
    let f = classify_direction(w0, pot, params, 1.0)?;
    let b = classify_direction(w0, pot, params, -1.0)?;
    let max_v2 = f.max_v2.max(b.max_v2);
    Ok(Classification {
        future: f.status,
        past: b.status,
        meets_o: max_v2 > params.v2_threshold,
        min_v2_along: f.min_v2.min(b.min_v2),
        max_v2_along: max_v2,
        v2_integral: f.integral + b.integral,
    })
}

/// Smallest sampled radius beyond which |2V₁ + x∇V₁| ≤ E/2 on both sides,
/// doubled. None if the condition never settles inside `search_radius`.
pub fn estimate_r_escape(pot: &Potential, e: f64, search_radius: f64, samples: usize) -> Option<f64> {
    let dr = search_radius / samples as f64;
    let ok = |r: f64| {
        [r, -r].iter().all(|&x| (2.0 * pot.v1(x) + x * pot.grad_v1(x)).abs() <= 0.5 * e)
    };
    let mut candidate = None;
    for k in (1..=samples).rev() {
        let r = k as f64 * dr;
        if ok(r) {
            candidate = Some(r);
        } else {
            break;
        }
    }
    match candidate {
        Some(r) if r < search_radius => Some(2.0 * r.max(dr)),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageVerdict {
    Covered,
    Uncovered,
    NoBoundedOrbits,
}

impl std::fmt::Display for CoverageVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoverageVerdict::Covered => "covered",
            CoverageVerdict::Uncovered => "uncovered",
            CoverageVerdict::NoBoundedOrbits => "no bounded orbits",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundedOrbit {
    pub w0: PhasePoint,
    pub meets_o: bool,
    pub v2_integral: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DampingReport {
    pub energy: f64,
    pub sampled: usize,
    pub undetermined: usize,
    pub bounded: Vec<BoundedOrbit>,
    pub fraction_meeting: f64,
    pub min_v2_integral: Option<f64>,
    pub verdict: CoverageVerdict,
}

/// Samples the shell p = E on |x| ≤ r_escape (both ξ branches) and checks
/// whether every bounded orbit meets {V₂ > 0}.
pub fn damping_condition_check(e: f64, pot: &Potential, params: &FlowParams, n_samples: usize) -> Result<DampingReport> {
    if !(e > 0.0) {
        return Err(Error::precondition("energy must be positive", e));
    }
    let r = params.r_escape;
    let starts: Vec<PhasePoint> = (0..n_samples)
        .flat_map(|k| {
            let x = -r + 2.0 * r * (k as f64 + 0.5) / n_samples as f64;
            let k2 = e - pot.v1(x);
            if k2 > 0.0 {
                let xi = k2.sqrt();
                vec![PhasePoint::new(x, xi), PhasePoint::new(x, -xi)]
            } else {
                vec![]
            }
        })
        .collect();
    if starts.is_empty() {
        return Err(Error::EmptyShell(format!("V1 > {e} at every sampled x")));
    }
    let results: Vec<(PhasePoint, Result<Classification>)> =
        starts.par_iter().map(|w| (*w, classify_trajectory(*w, pot, params))).collect();
    let mut bounded = Vec::new();
    let mut undetermined = 0;
    for (w, res) in results {
        match res {
            Ok(c) if c.bounded_future() && c.bounded_past() => {
                bounded.push(BoundedOrbit { w0: w, meets_o: c.meets_o, v2_integral: c.v2_integral })
            }
            Ok(_) => {}
            Err(Error::Undetermined { .. }) => undetermined += 1,
            Err(e) => return Err(e),
        }
    }
    let meeting = bounded.iter().filter(|b| b.meets_o).count();
    let verdict = if bounded.is_empty() {
        CoverageVerdict::NoBoundedOrbits
    } else if meeting == bounded.len() {
        CoverageVerdict::Covered
    } else {
        CoverageVerdict::Uncovered
    };
    let min_v2_integral = bounded.iter().map(|b| b.v2_integral).reduce(f64::min);
    Ok(DampingReport {
        energy: e,
        sampled: starts.len(),
        undetermined,
        fraction_meeting: if bounded.is_empty() { 1.0 } else { meeting as f64 / bounded.len() as f64 },
        bounded,
        min_v2_integral,
        verdict,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeCorrection {
    pub f_value: f64,
    pub bracket_residual: f64,
}

/// f(z) = ∫₀^T g(φ^{−t} z) dt by Simpson along the backward flow.
fn escape_integral(w: PhasePoint, pot: &Potential, g: &dyn Fn(PhasePoint) -> f64, t_w: f64, dt: f64) -> Result<(f64, PhasePoint)> {
    if t_w == 0.0 {
        return Ok((0.0, w));
    }
    let mut n = (t_w / dt).ceil() as usize;
    n += n % 2;
    let h = t_w / n as f64;
    let mut vals = Vec::with_capacity(n + 1);
    let mut z = w;
    vals.push(g(z));
    for _ in 0..n {
        z = step(z, pot, -h);
        if !z.is_finite() {
            return Err(Error::StepBlowup { t: -t_w });
        }
        vals.push(g(z));
    }
    Ok((simpson(&vals, h), z))
}

/// Escape-function correction f_w and the defect of d/dt f(φᵗ w) = g(w) − g(φ^{−T} w).
pub fn escape_correction(w: PhasePoint, pot: &Potential, g: &dyn Fn(PhasePoint) -> f64, t_w: f64, dt: f64) -> Result<EscapeCorrection> {
    if t_w < 0.0 {
        return Err(Error::precondition("T_w must be nonnegative", t_w));
    }
    let (f_value, end) = escape_integral(w, pot, g, t_w, dt)?;
    if t_w == 0.0 {
        return Ok(EscapeCorrection { f_value, bracket_residual: 0.0 });
    }
    let delta = 1e-3;
    let fp = escape_integral(flow_map(w, delta, pot, dt)?, pot, g, t_w, dt)?.0;
    let fm = escape_integral(flow_map(w, -delta, pot, dt)?, pot, g, t_w, dt)?.0;
    let derivative = (fp - fm) / (2.0 * delta);
    Ok(EscapeCorrection { f_value, bracket_residual: (derivative - (g(w) - g(end))).abs() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSampling {
    pub x_max: f64,
    pub n_x: usize,
    pub n_levels: usize,
}

impl Default for ShellSampling {
    fn default() -> Self {
        ShellSampling { x_max: 10.0, n_x: 4001, n_levels: 5 }
    }
}

/// inf over sampled p⁻¹([E−ε, E+ε]) of {p, x·ξ} + C_V V₂.
pub fn mourre_symbol_infimum(e: f64, eps: f64, pot: &Potential, c_v: f64, sampling: &ShellSampling) -> Result<f64> {
    if c_v < 0.0 {
        return Err(Error::precondition("C_V must be nonnegative", c_v));
    }
    let mut inf = f64::INFINITY;
    let levels = sampling.n_levels.max(1);
    for l in 0..levels {
        let el = if levels == 1 { e } else { e - eps + 2.0 * eps * l as f64 / (levels - 1) as f64 };
        for k in 0..sampling.n_x {
            let x = -sampling.x_max + 2.0 * sampling.x_max * k as f64 / (sampling.n_x.max(2) - 1) as f64;
            let k2 = el - pot.v1(x);
            if k2 < 0.0 {
                continue;
            }
            let w = PhasePoint::new(x, k2.sqrt());
            inf = inf.min(virial_bracket(w, pot) + c_v * pot.v2(x));
        }
    }
    if inf.is_finite() {
        Ok(inf)
    } else {
        Err(Error::EmptyShell(format!("no sampled point with energy in [{}, {}]", e - eps, e + eps)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{parse_damping, parse_potential, DampingShape, PotentialShape};

    fn preset(p: &str, d: &str) -> Potential {
        Potential::new(parse_potential(p, "p").unwrap(), parse_damping(d, "d").unwrap())
    }

    #[test]
    fn free_flow_is_exact() {
        let pot = Potential::free();
        let w = flow_map(PhasePoint::new(0.3, -0.7), 3.0, &pot, 1e-3).unwrap();
        assert!((w.x - (0.3 - 2.0 * 0.7 * 3.0)).abs() < 1e-12);
        assert!((w.xi + 0.7).abs() < 1e-15);
    }

    #[test]
    fn harmonic_closed_form() {
        let pot = Potential::new(PotentialShape::Quadratic { coefficient: 1.0 }, DampingShape::None);
        let p = FlowParams { t_max: 10.0, ..Default::default() };
        let tr = integrate_flow(PhasePoint::new(1.0, 0.0), &pot, &p).unwrap();
        let err = tr
            .times
            .iter()
            .zip(&tr.points)
            .map(|(t, w)| (w.x - (2.0 * t).cos()).abs().max((w.xi + (2.0 * t).sin()).abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constant_damping_factor() {
        let pot = preset("free", "constant(0.5)");
        let p = FlowParams { t_max: 1.0, ..Default::default() };
        let tr = integrate_flow(PhasePoint::new(0.0, 1.0), &pot, &p).unwrap();
        let last = tr.q_values.len() - 1;
        assert!((tr.q_values[last] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((tr.q1_values[last] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((tr.q_values[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn energy_and_bracket_values() {
        let pot = Potential::new(PotentialShape::GaussianBump { amplitude: 1.0, width: 1.0 }, DampingShape::None);
        assert_eq!(energy(PhasePoint::new(0.0, 2.0), &pot), 5.0);
        assert_eq!(virial_bracket(PhasePoint::new(0.0, 1.0), &pot), 2.0);
        assert_eq!(energy(PhasePoint::new(1.3, 0.0), &Potential::free()), 0.0);
    }

    #[test]
    fn shell_projection_hits_energy() {
        let pot = preset("double_barrier", "none");
        let w = project_to_shell(PhasePoint::new(0.4, 0.8), &pot, 1.0).unwrap();
        assert!((energy(w, &pot) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_is_derivative_of_x_xi() {
        let pot = preset("double_barrier", "none");
        let w = PhasePoint::new(1.7, 0.6);
        let d = 1e-4;
        let f = |t: f64| {
            let p = flow_map(w, t, &pot, 1e-5).unwrap();
            p.x * p.xi
        };
        let fd = (f(d) - f(-d)) / (2.0 * d);
        assert!((fd - virial_bracket(w, &pot)).abs() < 1e-6);
    }

    #[test]
    fn classification_examples() {
        let p = FlowParams::default();
        let c = classify_trajectory(PhasePoint::new(0.0, 1.0), &Potential::free(), &p).unwrap();
        assert!(!c.bounded_future() && !c.bounded_past());

        let pot = preset("double_barrier(2,2)", "well_centered");
        let c = classify_trajectory(PhasePoint::new(0.0, 1.0), &pot, &p).unwrap();
        assert!(c.bounded_future() && c.bounded_past());
        assert!(c.meets_o && c.min_v2_along > 0.0);
    }

    #[test]
    fn coverage_verdicts() {
        let p = FlowParams { t_max: 20.0, r_escape: 6.0, ..Default::default() };
        let r = damping_condition_check(1.0, &Potential::free(), &p, 40).unwrap();
        assert_eq!(r.verdict, CoverageVerdict::NoBoundedOrbits);
        let r = damping_condition_check(1.0, &preset("double_barrier", "well_centered"), &p, 40).unwrap();
        assert_eq!(r.verdict, CoverageVerdict::Covered);
        let r = damping_condition_check(1.0, &preset("double_barrier", "outside_only"), &p, 40).unwrap();
        assert_eq!(r.verdict, CoverageVerdict::Uncovered);
    }

    #[test]
    fn empty_shell_is_an_error() {
        let pot = Potential::new(PotentialShape::GaussianBump { amplitude: 5.0, width: 100.0 }, DampingShape::None);
        let p = FlowParams { r_escape: 2.0, ..Default::default() };
        assert!(matches!(damping_condition_check(1.0, &pot, &p, 10), Err(Error::EmptyShell(_))));
    }

    #[test]
    fn r_escape_for_double_barrier() {
        let pot = preset("double_barrier", "none");
        let r = estimate_r_escape(&pot, 1.0, 20.0, 2000).unwrap();
        assert!(r > 4.0 && r < 8.0, "{r}");
        let quad = Potential::new(PotentialShape::Quadratic { coefficient: 1.0 }, DampingShape::None);
        assert!(estimate_r_escape(&quad, 1.0, 20.0, 2000).is_none());
    }

    #[test]
    fn escape_correction_examples() {
        let pot = Potential::free();
        let g = |w: PhasePoint| (-(w.x * w.x + (w.xi - 1.0).powi(2))).exp();
        let e = escape_correction(PhasePoint::new(0.5, 1.0), &pot, &g, 0.0, 1e-3).unwrap();
        assert_eq!((e.f_value, e.bracket_residual), (0.0, 0.0));
        let e = escape_correction(PhasePoint::new(0.5, 1.0), &pot, &g, 1.0, 1e-3).unwrap();
        assert!(e.bracket_residual < 1e-5, "{}", e.bracket_residual);
        let far = |w: PhasePoint| if w.x > 50.0 { 1.0 } else { 0.0 };
        let e = escape_correction(PhasePoint::new(0.0, 1.0), &pot, &far, 1.0, 1e-3).unwrap();
        assert_eq!(e.f_value, 0.0);
    }

    #[test]
    fn mourre_infimum_examples() {
        let s = ShellSampling::default();
        let inf = mourre_symbol_infimum(1.0, 0.0, &Potential::free(), 0.0, &ShellSampling { n_levels: 1, ..s }).unwrap();
        assert!((inf - 2.0).abs() < 1e-12);
        let db = preset("double_barrier", "well_centered");
        assert!(mourre_symbol_infimum(1.0, 0.05, &db, 0.0, &s).unwrap() < 0.0);
        assert!(mourre_symbol_infimum(1.0, 0.05, &db, 1e5, &s).unwrap() > 0.0);
    }
}
