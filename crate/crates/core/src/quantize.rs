//! Grid discretization of H₁, H, the weights ⟨x⟩⁻ˢ, the dilation generator
//! and Weyl quantization of symbols.

use std::io::{Read, Write};
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BandMatrix, C64, I, ZERO};
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 8 {
            return Err(Error::precondition("grid needs at least 8 points", n_points as f64));
        }
        if !(x_max > x_min) {
            return Err(Error::precondition("grid box must have x_max > x_min", x_max - x_min));
        }
        Ok(Grid { x_min, x_max, n_points })
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Same box, twice the number of intervals.
    pub fn refined(&self) -> Grid {
        Grid { n_points: 2 * self.n_points - 1, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuLaw {
    /// ν = h
    Linear,
    /// ν = h²
    Quadratic,
    /// ν = c·h^k
    Power { coefficient: f64, exponent: f64 },
    /// piecewise-linear interpolation in (h, ν)
    Table(Vec<(f64, f64)>),
}

impl NuLaw {
    pub fn parse(spec: &str, key: &str) -> Result<NuLaw> {
        let s = spec.trim();
        match s {
            "h" => return Ok(NuLaw::Linear),
            "h2" | "h^2" => return Ok(NuLaw::Quadratic),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("power(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if let [c, k] = parts.as_slice() {
                let c = c.parse().map_err(|_| Error::config(key, format!("bad coefficient `{c}`")))?;
                let k = k.parse().map_err(|_| Error::config(key, format!("bad exponent `{k}`")))?;
                return Ok(NuLaw::Power { coefficient: c, exponent: k });
            }
        }
        Err(Error::config(key, format!("unknown nu law `{s}` (expected h, h2 or power(c,k))")))
    }

    pub fn eval(&self, h: f64) -> f64 {
        match self {
            NuLaw::Linear => h,
            NuLaw::Quadratic => h * h,
            NuLaw::Power { coefficient, exponent } => coefficient * h.powf(*exponent),
            NuLaw::Table(t) => {
                if t.is_empty() {
                    return f64::NAN;
                }
                let mut pts = t.clone();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                if h <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    if h <= w[1].0 {
                        let s = (h - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + s * (w[1].1 - w[0].1);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }
}

impl std::fmt::Display for NuLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NuLaw::Linear => write!(f, "h"),
            NuLaw::Quadratic => write!(f, "h2"),
            NuLaw::Power { coefficient, exponent } => write!(f, "power({coefficient},{exponent})"),
            NuLaw::Table(t) => write!(f, "table({} points)", t.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalParams {
    pub h: f64,
    pub nu_law: NuLaw,
}

impl SemiclassicalParams {
    pub fn new(h: f64, nu_law: NuLaw) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::precondition("h must lie in (0, 1]", h));
        }
        let nu = nu_law.eval(h);
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::precondition("nu(h) must lie in (0, 1]", nu));
        }
        Ok(SemiclassicalParams { h, nu_law })
    }

    pub fn nu(&self) -> f64 {
        self.nu_law.eval(self.h)
    }

    pub fn nu_tilde(&self) -> f64 {
        (self.nu() / self.h).min(1.0)
    }

    /// 1/(h ν̃(h)), the predicted scaling of resolvent norms.
    pub fn scaling_variable(&self) -> f64 {
        1.0 / (self.h * self.nu_tilde())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    Second,
    Fourth,
    /// Dense periodic Fourier Laplacian.
    Spectral,
}

impl StencilOrder {
    pub fn from_order(order: u32, key: &str) -> Result<Self> {
        match order {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            0 => Ok(StencilOrder::Spectral),
            o => Err(Error::config(key, format!("stencil order {o} not in {{2, 4, 0 (spectral)}}"))),
        }
    }

    /// Largest admissible k_max·Δx.
    pub fn resolution_limit(&self) -> f64 {
        match self {
            StencilOrder::Second => 0.25,
            StencilOrder::Fourth => 0.7,
            StencilOrder::Spectral => 0.9 * std::f64::consts::PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpongeConfig {
    pub strength: f64,
    pub width_fraction: f64,
}

impl Default for SpongeConfig {
    fn default() -> Self {
        SpongeConfig { strength: 1.0, width_fraction: 0.15 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianConfig {
    pub stencil: StencilOrder,
    pub sponge: Option<SpongeConfig>,
    /// Highest energy the grid must resolve; None disables the guard.
    pub e_max: Option<f64>,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        HamiltonianConfig { stencil: StencilOrder::Second, sponge: None, e_max: Some(1.1) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    H1,
    H,
    Weight(f64),
    DilationGenerator,
    Weyl(String),
    Sponge,
    Other(String),
}

impl Role {
    pub fn id(&self) -> u32 {
        match self {
            Role::H1 => 1,
            Role::H => 2,
            Role::Weight(_) => 3,
            Role::DilationGenerator => 4,
            Role::Weyl(_) => 5,
            Role::Sponge => 6,
            Role::Other(_) => 7,
        }
    }

    fn from_id(id: u32) -> Role {
        match id {
            1 => Role::H1,
            2 => Role::H,
            3 => Role::Weight(f64::NAN),
            4 => Role::DilationGenerator,
            5 => Role::Weyl(String::new()),
            6 => Role::Sponge,
            _ => Role::Other(String::new()),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Storage {
    Diagonal(Vec<C64>),
    Banded(BandMatrix),
    Dense(Mat<C64>),
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub storage: Storage,
    pub role: Role,
    pub hermitian: bool,
}

impl DiscreteOperator {
    pub fn new(storage: Storage, role: Role) -> Self {
        let mut op = DiscreteOperator { storage, role, hermitian: false };
        op.hermitian = op.hermitian_defect() <= 1e-12 * op.max_abs().max(1.0);
        op
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Diagonal(d) => d.len(),
            Storage::Banded(b) => b.dim(),
            Storage::Dense(m) => m.nrows(),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match &self.storage {
            Storage::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            Storage::Banded(b) => b.matvec(v),
            Storage::Dense(m) => linalg::dense_matvec(m.as_ref(), v),
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        match &self.storage {
            Storage::Diagonal(d) => linalg::diag_mat(d),
            Storage::Banded(b) => b.to_dense(),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn adjoint(&self) -> DiscreteOperator {
        let storage = match &self.storage {
            Storage::Diagonal(d) => Storage::Diagonal(d.iter().map(|c| c.conj()).collect()),
            Storage::Banded(b) => Storage::Banded(b.adjoint()),
            Storage::Dense(m) => Storage::Dense(m.adjoint().to_owned()),
        };
        DiscreteOperator { storage, role: self.role.clone(), hermitian: self.hermitian }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Diagonal(d) => d.iter().map(|c| c.norm()).fold(0.0, f64::max),
            Storage::Banded(b) => {
                let mut m = 0.0f64;
                b.for_each(|_, _, v| m = m.max(v.norm()));
                m
            }
            Storage::Dense(m) => linalg::max_abs(m.as_ref()),
        }
    }

    /// max |M − M*| entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        match &self.storage {
            Storage::Diagonal(d) => d.iter().map(|c| 2.0 * c.im.abs()).fold(0.0, f64::max),
            Storage::Banded(b) => b.hermitian_defect(),
            Storage::Dense(m) => linalg::hermitian_defect(m.as_ref()),
        }
    }

    /// Diagonal entries, whatever the storage.
    pub fn diagonal(&self) -> Vec<C64> {
        match &self.storage {
            Storage::Diagonal(d) => d.clone(),
            Storage::Banded(b) => (0..b.dim()).map(|i| b.get(i, i)).collect(),
            Storage::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)]).collect(),
        }
    }

    /// Anti-hermitian part (M − M*)/(2i) as a dense hermitian matrix.
    pub fn imaginary_part(&self) -> Mat<C64> {
        let m = self.to_dense();
        let n = m.nrows();
        Mat::from_fn(n, n, |i, j| (m[(i, j)] - m[(j, i)].conj()) / (2.0 * I))
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let m = self.to_dense();
        let n = m.nrows();
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.role.id().to_le_bytes())?;
        w.write_all(&(self.hermitian as u32).to_le_bytes())?;
        w.write_all(&0u64.to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * n);
        for i in 0..n {
            buf.clear();
            for j in 0..n {
                buf.extend_from_slice(&m[(i, j)].re.to_le_bytes());
                buf.extend_from_slice(&m[(i, j)].im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<DiscreteOperator> {
        let mut head = [0u8; 32];
        r.read_exact(&mut head)?;
        if &head[..8] != MATRIX_MAGIC {
            return Err(Error::Io("bad matrix magic".into()));
        }
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let role = Role::from_id(u32::from_le_bytes(head[16..20].try_into().unwrap()));
        let hermitian = u32::from_le_bytes(head[20..24].try_into().unwrap()) & 1 == 1;
        let mut body = vec![0u8; 16 * n * n];
        r.read_exact(&mut body)?;
        let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
        let m = Mat::from_fn(n, n, |i, j| C64::new(f(2 * (i * n + j)), f(2 * (i * n + j) + 1)));
        Ok(DiscreteOperator { storage: Storage::Dense(m), role, hermitian })
    }
}

/// 32-byte header: magic, u64 n, u32 role id, u32 flags (bit 0 hermitian), u64 reserved.
pub const MATRIX_MAGIC: &[u8; 8] = b"DSSPMAT1";

/// Nonnegative absorbing profile, quadratic ramp over the outer
/// `width_fraction` of each half of the box.
pub fn sponge_profile(grid: &Grid, cfg: &SpongeConfig) -> Vec<f64> {
    let half = 0.5 * (grid.x_max - grid.x_min);
    let center = 0.5 * (grid.x_max + grid.x_min);
    let width = half * cfg.width_fraction;
    let start = half - width;
    grid.nodes()
        .iter()
        .map(|x| {
            let d = (x - center).abs() - start;
            if d > 0.0 && width > 0.0 {
                cfg.strength * (d / width).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// −h²Δ on the grid.
pub fn kinetic(grid: &Grid, h: f64, stencil: StencilOrder) -> Storage {
    let n = grid.n_points;
    let dx = grid.spacing();
    let c = h * h / (dx * dx);
    match stencil {
        StencilOrder::Second => {
            let mut b = BandMatrix::zeros(n, 1, 1);
            for i in 0..n {
                b.set(i, i, C64::from(2.0 * c));
                if i + 1 < n {
                    b.set(i, i + 1, C64::from(-c));
                    b.set(i + 1, i, C64::from(-c));
                }
            }
            Storage::Banded(b)
        }
        StencilOrder::Fourth => {
            let mut b = BandMatrix::zeros(n, 2, 2);
            for i in 0..n {
                b.set(i, i, C64::from(2.5 * c));
                for (off, v) in [(1, -16.0 / 12.0 * c), (2, 1.0 / 12.0 * c)] {
                    if i + off < n {
                        b.set(i, i + off, C64::from(v));
                        b.set(i + off, i, C64::from(v));
                    }
                }
            }
            Storage::Banded(b)
        }
        StencilOrder::Spectral => {
            let xis = dual_momenta(grid, h);
            let weights = nyquist_weights(n);
            let t: Vec<f64> = (0..n)
                .map(|d| {
                    xis.iter()
                        .zip(&weights)
                        .zip(dual_indices(n))
                        .map(|((xi, w), l)| w * xi * xi * (2.0 * std::f64::consts::PI * (d as f64) * l as f64 / n as f64).cos())
                        .sum::<f64>()
                        / n as f64
                })
                .collect();
            Storage::Dense(Mat::from_fn(n, n, |i, j| C64::from(t[i.abs_diff(j)])))
        }
    }
}

/// Dual indices l = −⌊n/2⌋ ..= ⌊n/2⌋ for even n (the Nyquist index appears
/// twice, half-weighted) and −(n−1)/2 ..= (n−1)/2 for odd n.
fn dual_indices(n: usize) -> impl Iterator<Item = i64> + Clone {
    let half = (n / 2) as i64;
    let hi = if n % 2 == 0 { half } else { half };
    (-half..=hi).take(if n % 2 == 0 { n + 1 } else { n })
}

fn nyquist_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; if n % 2 == 0 { n + 1 } else { n }];
    if n % 2 == 0 {
        w[0] = 0.5;
        w[n] = 0.5;
    }
    w
}

/// Momenta ξ_l = 2πh·l/(nΔx) on the dual grid.
pub fn dual_momenta(grid: &Grid, h: f64) -> Vec<f64> {
    let n = grid.n_points;
    let dxi = 2.0 * std::f64::consts::PI * h / (n as f64 * grid.spacing());
    dual_indices(n).map(|l| l as f64 * dxi).collect()
}

fn check_resolution(grid: &Grid, h: f64, cfg: &HamiltonianConfig, pot: &Potential) -> Result<()> {
    if let Some(e_max) = cfg.e_max {
        let v_min = grid.nodes().iter().map(|x| pot.v1(*x)).fold(f64::INFINITY, f64::min);
        let k_max = (e_max - v_min.min(0.0)).max(0.0).sqrt() / h;
        let product = k_max * grid.spacing();
        let limit = cfg.stencil.resolution_limit();
        if product > limit {
            return Err(Error::ResolutionError { product, limit });
        }
    }
    Ok(())
}

/// Returns (H₁, H) with H = H₁ − iν(h)V₂ − i·sponge.
pub fn build_hamiltonian(
    grid: &Grid,
    pot: &Potential,
    params: &SemiclassicalParams,
    cfg: &HamiltonianConfig,
) -> Result<(DiscreteOperator, DiscreteOperator)> {
    check_resolution(grid, params.h, cfg, pot)?;
    let nodes = grid.nodes();
    let v1: Vec<C64> = nodes.iter().map(|x| C64::from(pot.v1(*x))).collect();
    let nu = params.nu();
    let sponge = cfg.sponge.map(|s| sponge_profile(grid, &s)).unwrap_or_else(|| vec![0.0; nodes.len()]);
    let absorb: Vec<C64> = nodes
        .iter()
        .zip(&sponge)
        .map(|(x, s)| C64::new(0.0, -(nu * pot.v2(*x) + s)))
        .collect();
    let (h1, h) = match kinetic(grid, params.h, cfg.stencil) {
        Storage::Banded(mut b) => {
            b.add_diagonal(&v1);
            let mut full = b.clone();
            full.add_diagonal(&absorb);
            (Storage::Banded(b), Storage::Banded(full))
        }
        Storage::Dense(mut m) => {
            for i in 0..m.nrows() {
                m[(i, i)] += v1[i];
            }
            let mut full = m.clone();
            for i in 0..m.nrows() {
                full[(i, i)] += absorb[i];
            }
            (Storage::Dense(m), Storage::Dense(full))
        }
        Storage::Diagonal(_) => unreachable!("kinetic part is never diagonal"),
    };
    Ok((DiscreteOperator::new(h1, Role::H1), DiscreteOperator::new(h, Role::H)))
}

pub fn weights(grid: &Grid, s: f64) -> Vec<f64> {
    grid.nodes().iter().map(|x| (1.0 + x * x).powf(-0.5 * s)).collect()
}

pub fn weight_operator(grid: &Grid, s: f64) -> DiscreteOperator {
    let d = weights(grid, s).into_iter().map(C64::from).collect();
    DiscreteOperator { storage: Storage::Diagonal(d), role: Role::Weight(s), hermitian: true }
}

/// h·D with D = −i × central difference.
fn momentum_band(grid: &Grid, h: f64) -> BandMatrix {
    let n = grid.n_points;
    let c = h / (2.0 * grid.spacing());
    let mut b = BandMatrix::zeros(n, 1, 1);
    for i in 0..n - 1 {
        b.set(i, i + 1, C64::new(0.0, -c));
        b.set(i + 1, i, C64::new(0.0, c));
    }
    b
}

/// ½(c·P + P·c) for a multiplication by c(x) and P = hD.
fn symmetrized_first_order(grid: &Grid, h: f64, c: &dyn Fn(f64) -> f64) -> BandMatrix {
    let p = momentum_band(grid, h);
    let mut out = BandMatrix::zeros(grid.n_points, 1, 1);
    p.for_each(|i, j, v| {
        if i != j {
            out.set(i, j, v * 0.5 * (c(grid.node(i)) + c(grid.node(j))));
        }
    });
    out
}

/// A = ½(x·hD + hD·x), hermitian by construction.
pub fn dilation_generator(grid: &Grid, h: f64) -> DiscreteOperator {
    let b = symmetrized_first_order(grid, h, &|x| x);
    DiscreteOperator { storage: Storage::Banded(b), role: Role::DilationGenerator, hermitian: true }
}

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SymbolFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Real phase-space symbol.
#[derive(Clone)]
pub enum Symbol {
    /// c₀(x) + c₁(x)ξ + c₂(x)ξ², quantized by exact differential rules.
    Polynomial { name: String, c0: Option<Coefficient>, c1: Option<Coefficient>, c2: Option<Coefficient> },
    /// Symbol decaying in ξ, quantized by quadrature on the dual grid.
    General { name: String, f: SymbolFn },
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Symbol({})", self.name())
    }
}

impl Symbol {
    pub fn name(&self) -> &str {
        match self {
            Symbol::Polynomial { name, .. } | Symbol::General { name, .. } => name,
        }
    }

    pub fn position() -> Symbol {
        Symbol::Polynomial { name: "x".into(), c0: Some(Arc::new(|x| x)), c1: None, c2: None }
    }

    pub fn momentum() -> Symbol {
        Symbol::Polynomial { name: "xi".into(), c0: None, c1: Some(Arc::new(|_| 1.0)), c2: None }
    }

    pub fn dilation() -> Symbol {
        Symbol::Polynomial { name: "x*xi".into(), c0: None, c1: Some(Arc::new(|x| x)), c2: None }
    }

    pub fn function(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Symbol {
        Symbol::General { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        match self {
            Symbol::Polynomial { c0, c1, c2, .. } => {
                c0.as_ref().map_or(0.0, |c| c(x))
                    + c1.as_ref().map_or(0.0, |c| c(x)) * xi
                    + c2.as_ref().map_or(0.0, |c| c(x)) * xi * xi
            }
            Symbol::General { f, .. } => f(x, xi),
        }
    }
}

pub fn weyl_quantize(grid: &Grid, symbol: &Symbol, h: f64) -> Result<DiscreteOperator> {
    let role = Role::Weyl(symbol.name().to_string());
    match symbol {
        Symbol::Polynomial { c0, c1, c2, .. } => {
            let n = grid.n_points;
            let mut b = BandMatrix::zeros(n, 2, 2);
            if let Some(c) = c0 {
                for i in 0..n {
                    b.add(i, i, C64::from(c(grid.node(i))));
                }
            }
            if let Some(c) = c1 {
                b = b.plus(&symmetrized_first_order(grid, h, c.as_ref()));
            }
            if let Some(c) = c2 {
                // ¼(cP² + 2PcP + P²c) with P² replaced by the 3-point −h²Δ
                let Storage::Banded(t) = kinetic(grid, h, StencilOrder::Second) else { unreachable!() };
                let p = momentum_band(grid, h);
                let cv: Vec<C64> = grid.nodes().iter().map(|x| C64::from(c(*x))).collect();
                let mut part = BandMatrix::zeros(n, 2, 2);
                t.for_each(|i, j, v| part.add(i, j, 0.25 * v * (cv[i] + cv[j])));
                p.for_each(|i, k, pik| {
                    for j in k.saturating_sub(1)..=(k + 1).min(n - 1) {
                        let pkj = p.get(k, j);
                        if pkj != ZERO {
                            part.add(i, j, 0.5 * pik * cv[k] * pkj);
                        }
                    }
                });
                b = b.plus(&part);
            }
            Ok(DiscreteOperator::new(Storage::Banded(b), role))
        }
        Symbol::General { f, .. } => {
            let f = f.clone();
            let eval = move |m: f64, xis: &[f64]| xis.iter().map(|xi| f(m, *xi)).collect::<Vec<f64>>();
            let m = weyl_quantize_table(grid, h, &eval, true)?;
            Ok(DiscreteOperator::new(Storage::Dense(m), role))
        }
    }
}

/// Weyl quantization from a table: `eval(m, xis)` returns the symbol at the
/// midpoint m for every dual momentum. The kernel is
/// K_jk = (1/n) Σ_l w_l e^{2πi(j−k)l/n} a((x_j+x_k)/2, ξ_l), truncated to
/// |j−k| ≤ n/2 so that the periodic dual grid does not couple the box ends.
pub fn weyl_quantize_table(
    grid: &Grid,
    h: f64,
    eval: &(dyn Fn(f64, &[f64]) -> Vec<f64> + Sync),
    check_decay: bool,
) -> Result<Mat<C64>> {
    let n = grid.n_points;
    let dx = grid.spacing();
    let xis = dual_momenta(grid, h);
    let xi_nyq = xis.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let half = n / 2;
    // (midpoint, kernel column, peak, tail beyond 0.9 ξ_Nyq)
    let columns: Vec<(usize, Vec<C64>, f64, f64)> = (0..2 * n - 1)
        .into_par_iter()
        .map(|s| {
            let m = grid.x_min + 0.5 * s as f64 * dx;
            let vals = eval(m, &xis);
            let peak = vals.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let tail = xis
                .iter()
                .zip(&vals)
                .filter(|(xi, _)| xi.abs() >= 0.9 * xi_nyq)
                .fold(0.0f64, |a, (_, b)| a.max(b.abs()));
            let mut buf = vec![ZERO; n];
            for (idx, l) in dual_indices(n).enumerate() {
                let w = if n % 2 == 0 && (idx == 0 || idx == n) { 0.5 } else { 1.0 };
                buf[l.rem_euclid(n as i64) as usize] += C64::from(w * vals[idx]);
            }
            fft.process(&mut buf);
            (s, buf, peak, tail)
        })
        .collect();
    if check_decay {
        let peak = columns.iter().fold(0.0f64, |a, c| a.max(c.2));
        let tail = columns.iter().fold(0.0f64, |a, c| a.max(c.3));
        if peak > 0.0 && tail > 1e-8 * peak {
            return Err(Error::SymbolDecayError { tail, peak });
        }
    }
    let mut out = Mat::<C64>::zeros(n, n);
    let inv_n = 1.0 / n as f64;
    for (s, buf, _, _) in columns {
        // j + k = s, j − k = d
        let dmax = s.min(2 * n - 2 - s).min(half) as i64;
        let mut d = -dmax;
        while d <= dmax {
            if (s as i64 + d) % 2 == 0 {
                let j = ((s as i64 + d) / 2) as usize;
                let k = ((s as i64 - d) / 2) as usize;
                out[(j, k)] = buf[d.rem_euclid(n as i64) as usize] * inv_n;
            }
            d += 1;
        }
    }
    Ok(out)
}

/// λ_max((H − H*)/(2i)); H is dissipative iff this is ≤ 1e−12.
pub fn dissipativity_check(h: &DiscreteOperator) -> Result<f64> {
    let diag_only = match &h.storage {
        Storage::Diagonal(_) => true,
        Storage::Banded(b) => {
            let mut ok = true;
            b.for_each(|i, j, v| {
                if i != j && (v - b.get(j, i).conj()).norm() > 0.0 {
                    ok = false;
                }
            });
            ok
        }
        Storage::Dense(_) => false,
    };
    if diag_only {
        return Ok(h.diagonal().iter().map(|c| c.im).fold(f64::NEG_INFINITY, f64::max));
    }
    let (vals, _) = linalg::hermitian_eigen(h.imaginary_part().as_ref())?;
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{DampingShape, PotentialShape};

    fn band_limited(grid: &Grid, h: f64, xi0: f64) -> Vec<C64> {
        grid.nodes()
            .iter()
            .map(|x| C64::from_polar((-(x / 1.5).powi(2)).exp(), xi0 * x / h))
            .collect()
    }

    #[test]
    fn free_hamiltonian_is_tridiagonal_and_hermitian() {
        let g = Grid::new(-5.0, 5.0, 101).unwrap();
        let p = SemiclassicalParams::new(0.5, NuLaw::Linear).unwrap();
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (h1, h) = build_hamiltonian(&g, &Potential::free(), &p, &cfg).unwrap();
        assert!(h1.hermitian && h.hermitian);
        let c = 0.25 / (g.spacing() * g.spacing());
        let Storage::Banded(b) = &h.storage else { panic!() };
        assert!((b.get(3, 3) - C64::from(2.0 * c)).norm() < 1e-12);
        assert!((b.get(3, 4) - C64::from(-c)).norm() < 1e-12);
    }

    #[test]
    fn constant_damping_shifts_imaginary_diagonal() {
        let g = Grid::new(-5.0, 5.0, 64).unwrap();
        let p = SemiclassicalParams::new(0.25, NuLaw::Linear).unwrap();
        let pot = Potential::free().with_damping(DampingShape::Constant { value: 0.3 });
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (_, h) = build_hamiltonian(&g, &pot, &p, &cfg).unwrap();
        assert!(h.diagonal().iter().all(|d| (d.im + 0.25 * 0.3).abs() < 1e-15));
        let margin = dissipativity_check(&h).unwrap();
        assert!((margin + 0.075).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_spectrum() {
        let g = Grid::new(-5.0, 5.0, 2048).unwrap();
        let h = 0.1;
        let p = SemiclassicalParams::new(h, NuLaw::Linear).unwrap();
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (h1, _) = build_hamiltonian(&g, &Potential::free(), &p, &cfg).unwrap();
        let (vals, _) = linalg::hermitian_eigen(h1.to_dense().as_ref()).unwrap();
        // Dirichlet walls sit one spacing outside the first and last nodes
        let len = g.x_max - g.x_min + 2.0 * g.spacing();
        for m in 1..=5 {
            let exact = (h * std::f64::consts::PI * m as f64 / len).powi(2);
            assert!((vals[m - 1] - exact).abs() / exact < 0.01);
        }
    }

    #[test]
    fn resolution_guard() {
        let g = Grid::new(-8.0, 8.0, 256).unwrap();
        let p = SemiclassicalParams::new(1.0 / 64.0, NuLaw::Linear).unwrap();
        let e = build_hamiltonian(&g, &Potential::free(), &p, &HamiltonianConfig::default());
        assert!(matches!(e, Err(Error::ResolutionError { .. })));
    }

    #[test]
    fn weights() {
        let g = Grid::new(-3f64.sqrt(), 3f64.sqrt(), 9).unwrap();
        let w = super::weights(&g, 1.0);
        assert!((w[4] - 1.0).abs() < 1e-15 && (w[8] - 0.5).abs() < 1e-15);
        assert!(super::weights(&g, 0.0).iter().all(|v| *v == 1.0));
        let prod: Vec<f64> = super::weights(&g, 1.3).iter().zip(super::weights(&g, -1.3)).map(|(a, b)| a * b).collect();
        assert!(prod.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn dilation_generator_checks() {
        let g = Grid::new(-8.0, 8.0, 2048).unwrap();
        let h = 0.05;
        let a = dilation_generator(&g, h);
        assert!(a.hermitian_defect() <= 1e-12);
        // plane wave windowed near x = 2
        let xi0 = 0.8;
        let u: Vec<C64> = g.nodes().iter().map(|x| C64::from_polar((-((x - 2.0) / 0.7).powi(2)).exp(), xi0 * x / h)).collect();
        let num = linalg::dot(&u, &a.apply(&u)).re;
        let den = linalg::dot(&u, &u).re;
        let mean: f64 = g.nodes().iter().zip(&u).map(|(x, v)| x * xi0 * v.norm_sqr()).sum::<f64>() / den;
        assert!((num / den - mean).abs() / mean.abs() < 0.02);
        // i[T, A]/h = 2T on band-limited vectors
        let Storage::Banded(t) = kinetic(&g, h, StencilOrder::Second) else { panic!() };
        let v = band_limited(&g, h, 0.7);
        let tv = t.matvec(&v);
        let comm: Vec<C64> = linalg::sub(&t.matvec(&a.apply(&v)), &a.apply(&tv)).iter().map(|c| c * I / h).collect();
        let target: Vec<C64> = tv.iter().map(|c| 2.0 * c).collect();
        assert!(linalg::norm(&linalg::sub(&comm, &target)) / linalg::norm(&target) < 0.01);
    }

    #[test]
    fn weyl_polynomial_rules() {
        let g = Grid::new(-6.0, 6.0, 400).unwrap();
        let h = 0.1;
        let x = weyl_quantize(&g, &Symbol::position(), h).unwrap();
        assert!(x.diagonal().iter().zip(g.nodes()).all(|(d, xn)| (d - C64::from(xn)).norm() < 1e-15));
        let xxi = weyl_quantize(&g, &Symbol::dilation(), h).unwrap();
        let a = dilation_generator(&g, h);
        let v = band_limited(&g, h, 0.5);
        let diff = linalg::sub(&xxi.apply(&v), &a.apply(&v));
        assert!(linalg::norm(&diff) <= 0.01 * linalg::norm(&a.apply(&v)));
        // ξ against the exact Fourier multiplier on a plane wave packet
        let p = weyl_quantize(&g, &Symbol::momentum(), h).unwrap();
        let pv = p.apply(&v);
        let exact: Vec<C64> = g.nodes().iter().zip(&v).map(|(x, vv)| vv * (0.5 + I * h * (2.0 * x / 2.25))).collect();
        assert!(linalg::norm(&linalg::sub(&pv, &exact)) / linalg::norm(&exact) < 0.01);
    }

    #[test]
    fn weyl_general_matches_polynomial_and_is_hermitian() {
        let g = Grid::new(-4.0, 4.0, 256).unwrap();
        let h = 0.1;
        let gauss = Symbol::function("g", |x, xi| (-(x * x) - (xi - 0.3).powi(2) / 0.1).exp());
        let op = weyl_quantize(&g, &gauss, h).unwrap();
        assert!(op.hermitian_defect() < 1e-10);
        let tail = Symbol::function("flat", |_, _| 1.0);
        assert!(matches!(weyl_quantize(&g, &tail, h), Err(Error::SymbolDecayError { .. })));
        // x-only symbol must reduce to a diagonal
        let m = weyl_quantize_table(&g, h, &|m, xis| xis.iter().map(|_| (-(m * m)).exp()).collect(), false).unwrap();
        for i in 0..g.n_points {
            for j in 0..g.n_points {
                let expect = if i == j { (-(g.node(i).powi(2))).exp() } else { 0.0 };
                assert!((m[(i, j)] - C64::from(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_kinetic_matches_weyl_of_xi_squared() {
        let g = Grid::new(-4.0, 4.0, 64).unwrap();
        let h = 0.2;
        let Storage::Dense(t) = kinetic(&g, h, StencilOrder::Spectral) else { panic!() };
        let m = weyl_quantize_table(&g, h, &|_, xis| xis.iter().map(|x| x * x).collect(), false).unwrap();
        for i in 0..64usize {
            for j in 0..64usize {
                if i.abs_diff(j) <= 32 {
                    assert!((t[(i, j)] - m[(i, j)]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn binary_roundtrip() {
        let g = Grid::new(-1.0, 1.0, 10).unwrap();
        let p = SemiclassicalParams::new(0.5, NuLaw::Linear).unwrap();
        let pot = Potential::new(PotentialShape::Free, DampingShape::Constant { value: 1.0 });
        let cfg = HamiltonianConfig { e_max: None, ..Default::default() };
        let (_, h) = build_hamiltonian(&g, &pot, &p, &cfg).unwrap();
        let mut buf = Vec::new();
        h.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * 100);
        let back = DiscreteOperator::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.role, Role::H);
        assert_eq!(linalg::max_abs((back.to_dense() - h.to_dense()).as_ref()), 0.0);
    }

    #[test]
    fn nu_tilde_values() {
        let p = SemiclassicalParams::new(0.1, NuLaw::Linear).unwrap();
        assert_eq!(p.nu_tilde(), 1.0);
        assert!((p.scaling_variable() - 10.0).abs() < 1e-12);
        let p = SemiclassicalParams::new(0.1, NuLaw::Quadratic).unwrap();
        assert!((p.nu_tilde() - 0.1).abs() < 1e-15);
        assert!((p.scaling_variable() - 100.0).abs() < 1e-9);
    }
}
