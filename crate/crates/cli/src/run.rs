//! Executes a configuration and collects CSV tables, gates and a summary.

use anyhow::{Context, Result};
use dissipa_core::besov::{self, DyadicDecomposition, Reference};
use dissipa_core::dilation::{self, DilationSystem, SemigroupOptions, SineProbe};
use dissipa_core::egorov::{self, EgorovSetup, PhaseSymbol};
use dissipa_core::flow::{self, FlowParams, PhasePoint};
use dissipa_core::linalg::{self, C64};
use dissipa_core::quantize::{self, Grid, SemiclassicalParams, StencilOrder};
use dissipa_core::resolvent::{self, NormOptions, ScanOptions, SweepSetup};
use dissipa_core::{acceptance, scenario::Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, Config, DilationCheck, DilationInterior};

/// One CSV file, already rendered.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub bytes: Vec<u8>,
    pub rows: usize,
    pub all_converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub measured: String,
}

#[derive(Debug)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub gates: Vec<Gate>,
    pub seeds: Vec<u64>,
    pub summary: Value,
}

trait Converged {
    fn converged(&self) -> bool;
}

macro_rules! converged_field {
    ($($t:ty),*) => {$(impl Converged for $t { fn converged(&self) -> bool { self.grid_converged } })*};
}

fn table<T: Serialize + Converged>(file: &str, rows: &[T]) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().context("flushing csv")?;
    Ok(Table { file: file.into(), bytes, rows: rows.len(), all_converged: rows.iter().all(|r| r.converged()) })
}

fn gate(name: &str, passed: bool, measured: impl Into<String>) -> Gate {
    Gate { name: name.into(), passed, measured: measured.into() }
}

#[derive(Serialize)]
struct FlowRow {
    t: f64,
    x: f64,
    xi: f64,
    energy: f64,
    q: f64,
    q1: f64,
    grid_converged: bool,
}

#[derive(Serialize)]
struct ClassifyRow {
    x: f64,
    xi: f64,
    meets_o: bool,
    v2_integral: f64,
    grid_converged: bool,
}

#[derive(Serialize)]
struct ResolventRow {
    h: f64,
    nu: f64,
    nu_tilde: f64,
    re_z: f64,
    im_z: f64,
    s: f64,
    norm: f64,
    residual: f64,
    refined_norm: f64,
    grid_converged: bool,
}

#[derive(Serialize)]
struct SweepCsvRow {
    h: f64,
    nu: f64,
    nu_tilde: f64,
    re_z: f64,
    im_z: f64,
    s: f64,
    norm: f64,
    residual: f64,
    kind: &'static str,
    grid_converged: bool,
}

#[derive(Serialize)]
struct EgorovCsvRow {
    h: f64,
    error: f64,
    mixed_error: f64,
    test_dim: usize,
    grid_converged: bool,
}

#[derive(Serialize)]
struct DilationRow {
    probe: usize,
    kind: &'static str,
    re_z: f64,
    im_z: f64,
    t: f64,
    error: f64,
    #[serde(rename = "L")]
    l: f64,
    spacing: f64,
    grid_converged: bool,
}

#[derive(Serialize)]
struct BesovRow {
    j: usize,
    k: usize,
    block_norm: f64,
    weighted: f64,
    grid_converged: bool,
}

#[derive(Serialize)]
struct AcceptRow {
    id: u32,
    name: String,
    passed: bool,
    measured: String,
    seconds: f64,
    grid_converged: bool,
}

converged_field!(FlowRow, ClassifyRow, ResolventRow, SweepCsvRow, EgorovCsvRow, DilationRow, BesovRow, AcceptRow);

pub fn execute(cfg: &Config) -> Result<RunOutput> {
    let mut out = match cfg.command {
        Command::Flow => run_flow(cfg)?,
        Command::Classify => run_classify(cfg)?,
        Command::Resolvent => run_resolvent(cfg)?,
        Command::Sweep => run_sweep(cfg)?,
        Command::Egorov => run_egorov(cfg)?,
        Command::Dilation => run_dilation(cfg)?,
        Command::Besov => run_besov(cfg)?,
        Command::Accept => run_accept(cfg)?,
    };
    let tally = resolvent::resolvent_bound_tally();
    if tally.checks > 0 && cfg.command != Command::Accept {
        out.gates.push(gate(
            "resolvent bound",
            tally.violations == 0,
            format!("{} solves, {} violations", tally.checks, tally.violations),
        ));
    }
    Ok(out)
}

fn scenario_seed(sc: &Scenario) -> Vec<u64> {
    vec![sc.seed]
}

fn run_flow(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let f = &cfg.flow;
    let params = FlowParams { dt: f.dt, t_max: f.t_max, r_escape: 1e6, ..FlowParams::default() };
    let tr = flow::integrate_flow(PhasePoint::new(f.x, f.xi), &r.potential, &params)?;
    let rows: Vec<FlowRow> = (0..tr.times.len())
        .step_by(f.stride)
        .map(|k| FlowRow {
            t: tr.times[k],
            x: tr.points[k].x,
            xi: tr.points[k].xi,
            energy: flow::energy(tr.points[k], &r.potential),
            q: tr.q_values[k],
            q1: tr.q1_values[k],
            grid_converged: true,
        })
        .collect();
    let gates = vec![gate("energy drift", tr.max_energy_drift <= params.tol_energy, format!("{:.3e} (<= {:.0e})", tr.max_energy_drift, params.tol_energy))];
    Ok(RunOutput {
        tables: vec![table("flow.csv", &rows)?],
        gates,
        seeds: scenario_seed(&sc),
        summary: json!({
            "energy0": tr.energy0,
            "max_energy_drift": tr.max_energy_drift,
            "bounded_future": tr.bounded_future,
            "bounded_past": tr.bounded_past,
            "meets_o": tr.meets_o,
        }),
    })
}

fn run_classify(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.classify;
    let r_escape = match c.r_escape {
        Some(v) => v,
        None => flow::estimate_r_escape(&r.potential, c.energy, 50.0, 5000)
            .context("could not estimate an escape radius; set classify.r_escape")?,
    };
    let params = FlowParams { dt: c.dt, t_max: c.t_max, r_escape, ..FlowParams::default() };
    let rep = flow::damping_condition_check(c.energy, &r.potential, &params, c.samples)?;
    let rows: Vec<ClassifyRow> = rep
        .bounded
        .iter()
        .map(|b| ClassifyRow { x: b.w0.x, xi: b.w0.xi, meets_o: b.meets_o, v2_integral: b.v2_integral, grid_converged: true })
        .collect();
    Ok(RunOutput {
        tables: vec![table("classify.csv", &rows)?],
        gates: vec![],
        seeds: scenario_seed(&sc),
        summary: json!({
            "energy": rep.energy,
            "r_escape": r_escape,
            "sampled": rep.sampled,
            "undetermined": rep.undetermined,
            "bounded": rep.bounded.len(),
            "fraction_meeting": rep.fraction_meeting,
            "verdict": rep.verdict.to_string(),
        }),
    })
}

fn hamiltonian(sc: &Scenario, grid: &Grid, h: f64) -> Result<quantize::DiscreteOperator> {
    let r = sc.resolve()?;
    let params = SemiclassicalParams::new(h, r.nu_law.clone())?;
    Ok(quantize::build_hamiltonian(grid, &r.potential, &params, &r.hamiltonian)?.1)
}

fn run_resolvent(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.resolvent;
    let z = C64::new(c.z.0, c.z.1);
    let params = SemiclassicalParams::new(c.h, r.nu_law.clone())?;
    let norms: Vec<(f64, f64)> = [r.grid.clone(), r.grid.refined()]
        .par_iter()
        .map(|g| -> Result<(f64, f64)> {
            let op = hamiltonian(&sc, g, c.h)?;
            let margin = quantize::dissipativity_check(&op)?;
            Ok(resolvent::weighted_norm_with_residual(&op, &quantize::weights(g, sc.s), z, margin, &NormOptions::default())?)
        })
        .collect::<Result<_>>()?;
    let change = (norms[1].0 - norms[0].0).abs() / norms[0].0;
    let converged = change <= c.convergence_tol;
    let row = ResolventRow {
        h: c.h,
        nu: params.nu(),
        nu_tilde: params.nu_tilde(),
        re_z: z.re,
        im_z: z.im,
        s: sc.s,
        norm: norms[0].0,
        residual: norms[0].1,
        refined_norm: norms[1].0,
        grid_converged: converged,
    };
    Ok(RunOutput {
        tables: vec![table("resolvent.csv", &[row])?],
        gates: vec![gate("grid convergence", converged, format!("relative change {change:.3e} (<= {})", c.convergence_tol))],
        seeds: scenario_seed(&sc),
        summary: json!({ "norm": norms[0].0, "refined_norm": norms[1].0, "relative_change": change }),
    })
}

fn run_sweep(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.sweep;
    let setup = SweepSetup {
        potential: r.potential,
        grid: r.grid,
        hamiltonian: r.hamiltonian,
        nu_law: r.nu_law,
        interval: sc.interval,
        s: sc.s,
        mu_min: c.mu_min,
        scan: c.scan.then(ScanOptions::default),
        check_refinement: c.refine,
        convergence_tol: c.convergence_tol,
    };
    let res = resolvent::scaling_sweep(&setup, &c.h_list)?;
    let n_grid = res.zgrid.points().len();
    let rows: Vec<SweepCsvRow> = res
        .rows(sc.s)
        .into_iter()
        .enumerate()
        .map(|(i, r)| SweepCsvRow {
            h: r.h,
            nu: r.nu,
            nu_tilde: r.nu_tilde,
            re_z: r.re_z,
            im_z: r.im_z,
            s: r.s,
            norm: r.norm,
            residual: r.residual,
            kind: if i % (n_grid + 1) == n_grid { "sup" } else { "grid" },
            grid_converged: r.grid_converged,
        })
        .collect();
    let (slope_h, resid_h) = res.slope_vs_inverse_h();
    let mut gates = Vec::new();
    if c.refine {
        gates.push(gate(
            "grid convergence",
            res.grid_convergence_flag,
            format!(
                "max relative change {:.3e} (<= {})",
                res.points.iter().filter_map(|p| p.relative_change).fold(0.0, f64::max),
                c.convergence_tol
            ),
        ));
    }
    Ok(RunOutput {
        tables: vec![table("sweep.csv", &rows)?],
        gates,
        seeds: scenario_seed(&sc),
        summary: json!({
            "h": res.h_values,
            "sup_norms": res.norms,
            "slope_vs_inverse_h_nu_tilde": res.fitted_slope,
            "fit_residual": res.fit_residual,
            "slope_vs_inverse_h": slope_h,
            "fit_residual_vs_inverse_h": resid_h,
            "grid_converged": res.grid_convergence_flag,
        }),
    })
}

fn run_egorov(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.egorov;
    let symbol = PhaseSymbol::parse(&c.symbol, "egorov.symbol")?;
    let mut setup = EgorovSetup::standard(r.potential);
    setup.grid = r.grid;
    let table_ = egorov::egorov_compare(&setup, &symbol, c.t, &c.h_list)?;
    let refined = if c.refine {
        let mut fine = setup.clone();
        fine.grid = setup.grid.refined();
        Some(egorov::egorov_compare(&fine, &symbol, c.t, &c.h_list)?)
    } else {
        None
    };
    let rows: Vec<EgorovCsvRow> = table_
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| EgorovCsvRow {
            h: row.h,
            error: row.error,
            mixed_error: row.mixed_error,
            test_dim: row.test_dim,
            grid_converged: refined.as_ref().is_some_and(|f| {
                let other = &f.rows[i];
                (other.error - row.error).abs() <= c.convergence_tol * row.error.max(1e-300)
                    && (other.mixed_error - row.mixed_error).abs() <= c.convergence_tol * row.mixed_error.max(1e-300)
            }),
        })
        .collect();
    Ok(RunOutput {
        tables: vec![table("egorov.csv", &rows)?],
        gates: vec![],
        seeds: scenario_seed(&sc),
        summary: json!({ "t": c.t, "slope": table_.slope, "mixed_slope": table_.mixed_slope, "refined": c.refine }),
    })
}

fn run_dilation(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.dilation;
    let sys = match c.interior {
        DilationInterior::Grid => {
            let grid = Grid::new(c.x_min, c.x_max, c.n_points)?;
            DilationSystem::from_potential(&grid, &r.potential, c.h, StencilOrder::Second, c.channel_length, c.spacing)?
        }
        DilationInterior::Scalar => DilationSystem::scalar(c.scalar_lambda, c.scalar_damping, c.h, c.channel_length, c.spacing)?,
    };
    let seed = sc.seed;
    let (rows, max_error) = match c.check {
        DilationCheck::Resolvent => {
            let z = C64::new(c.z.0, c.z.1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let probes: Vec<SineProbe> = (0..c.probes).map(|p| SineProbe::random(&sys, &mut rng, p % 2 == 1)).collect();
            let rows: Vec<DilationRow> = probes
                .par_iter()
                .enumerate()
                .flat_map_iter(|(p, probe)| {
                    let sys = &sys;
                    [z, z.conj()].into_iter().map(move |w| -> Result<DilationRow> {
                        let with_channels = p % 2 == 1;
                        let phi = probe.sample(sys);
                        let psi = dilation::dilation_resolvent(sys, w, &phi)?;
                        let exact = dilation::exact_probe_resolvent(sys, w, probe)?;
                        let error = if with_channels {
                            psi.difference(&exact).norm(sys.step()) / exact.norm(sys.step())
                        } else {
                            linalg::norm(&linalg::sub(&psi.phi_0, &exact.phi_0)) / linalg::norm(&exact.phi_0)
                        };
                        Ok(DilationRow {
                            probe: p,
                            kind: if with_channels { "channel" } else { "interior" },
                            re_z: w.re,
                            im_z: w.im,
                            t: 0.0,
                            error,
                            l: c.channel_length,
                            spacing: sys.step(),
                            grid_converged: true,
                        })
                    })
                })
                .collect::<Result<_>>()?;
            let max = rows.iter().map(|r| r.error).fold(0.0, f64::max);
            (rows, max)
        }
        DilationCheck::Semigroup => {
            let rep = dilation::verify_semigroup_dilation(&sys, &c.t_list, c.probes.max(1), seed, &SemigroupOptions::default())?;
            let rows = rep
                .t_list
                .iter()
                .zip(&rep.errors)
                .enumerate()
                .map(|(i, (t, e))| DilationRow {
                    probe: i,
                    kind: "semigroup",
                    re_z: 0.0,
                    im_z: 0.0,
                    t: *t,
                    error: *e,
                    l: c.channel_length,
                    spacing: sys.step(),
                    grid_converged: true,
                })
                .collect();
            (rows, rep.max_error)
        }
    };
    Ok(RunOutput {
        tables: vec![table("dilation.csv", &rows)?],
        gates: vec![gate("dilation identity", max_error <= c.tolerance, format!("max error {max_error:.3e} (<= {:.0e})", c.tolerance))],
        seeds: vec![seed],
        summary: json!({ "max_error": max_error, "interior_dim": sys.interior_dim(), "channels": sys.channel_count() }),
    })
}

fn run_besov(cfg: &Config) -> Result<RunOutput> {
    let sc = cfg.scenario.build()?;
    let r = sc.resolve()?;
    let c = &cfg.besov;
    let reference = Reference::parse(&c.reference, "besov.reference")?;
    let z = C64::new(c.z.0, c.z.1);
    let s = sc.s;
    let compute = |grid: &Grid| -> Result<besov::BesovOperatorNorm> {
        let op = hamiltonian(&sc, grid, c.h)?;
        let m = besov::dense_resolvent(&op, z)?;
        let dec = DyadicDecomposition::for_reference(grid, c.h, reference)?;
        Ok(besov::operator_norm_bs(&m, &dec, s)?)
    };
    let norm = compute(&r.grid)?;
    let refined = if c.refine { Some(compute(&r.grid.refined())?.value) } else { None };
    let converged = refined.is_some_and(|v| (v - norm.value).abs() <= c.convergence_tol * norm.value);
    let rows: Vec<BesovRow> = norm
        .blocks
        .iter()
        .map(|b| BesovRow { j: b.j, k: b.k, block_norm: b.block_norm, weighted: b.weighted, grid_converged: converged })
        .collect();
    Ok(RunOutput {
        tables: vec![table("besov.csv", &rows)?],
        gates: vec![],
        seeds: scenario_seed(&sc),
        summary: json!({ "norm": norm.value, "argmax": [norm.argmax.0, norm.argmax.1], "refined_norm": refined }),
    })
}

fn run_accept(cfg: &Config) -> Result<RunOutput> {
    let outcomes = acceptance::run(&cfg.accept.only);
    let rows: Vec<AcceptRow> = outcomes
        .iter()
        .map(|o| AcceptRow { id: o.id, name: o.name.clone(), passed: o.passed, measured: o.measured.clone(), seconds: o.seconds, grid_converged: true })
        .collect();
    let gates = outcomes.iter().map(|o| gate(&format!("criterion {} {}", o.id, o.name), o.passed, o.measured.clone())).collect();
    Ok(RunOutput {
        tables: vec![table("acceptance.csv", &rows)?],
        gates,
        seeds: acceptance::SEEDS.to_vec(),
        summary: json!({ "passed": outcomes.iter().filter(|o| o.passed).count(), "total": outcomes.len() }),
    })
}
