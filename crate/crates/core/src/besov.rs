//! Dyadic Besov norms relative to a selfadjoint reference F and the
//! B_s → B_s* operator norm.

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::potential::Potential;
use crate::quantize::{self, DiscreteOperator, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams};
use crate::resolvent::ResolventSolver;

/// Full diagonalization cap for the reference operator.
pub const MAX_REFERENCE_DIM: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// multiplication by x
    Position,
    /// ½(x·hD + hD·x)
    Dilation,
}

impl Reference {
    pub fn parse(s: &str, key: &str) -> Result<Reference> {
        match s.trim() {
            "x" | "position" => Ok(Reference::Position),
            "ah" | "dilation" => Ok(Reference::Dilation),
            other => Err(Error::config(key, format!("unknown reference `{other}` (expected ah or x)"))),
        }
    }
}

/// Block of λ: 0 for |λ| < 1, else j with 2^{j−1} ≤ |λ| < 2^j.
/// Values within 1e−12 of a boundary go to the lower block.
pub fn block_index(lambda: f64) -> usize {
    let a = lambda.abs();
    if a < 1.0 + 1e-12 {
        return 0;
    }
    let mut j = a.log2().floor() as i64 + 1;
    // guard the floor against rounding on either side
    while j > 1 && a < 2f64.powi(j as i32 - 1) {
        j -= 1;
    }
    while a >= 2f64.powi(j as i32) {
        j += 1;
    }
    if (a - 2f64.powi(j as i32 - 1)).abs() <= 1e-12 * a.max(1.0) {
        j -= 1;
    }
    j as usize
}

#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub eigenvalues: Vec<f64>,
    /// eigenvectors as columns; `None` means the reference is already diagonal
    pub basis: Option<Mat<C64>>,
    pub block_of: Vec<usize>,
    /// indices per block j = 0, 1, …; blocks may be empty
    pub blocks: Vec<Vec<usize>>,
}

impl DyadicDecomposition {
    fn from_spectrum(eigenvalues: Vec<f64>, basis: Option<Mat<C64>>) -> Self {
        let block_of: Vec<usize> = eigenvalues.iter().map(|l| block_index(*l)).collect();
        let nb = block_of.iter().max().map_or(1, |m| m + 1);
        let mut blocks = vec![Vec::new(); nb];
        for (i, b) in block_of.iter().enumerate() {
            blocks[*b].push(i);
        }
        DyadicDecomposition { eigenvalues, basis, block_of, blocks }
    }

    /// F hermitian, dense.
    pub fn new(f: &Mat<C64>) -> Result<Self> {
        if f.nrows() > MAX_REFERENCE_DIM {
            return Err(Error::precondition("reference diagonalization is capped at 2048", f.nrows() as f64));
        }
        let scale = linalg::max_abs(f.as_ref()).max(1.0);
        let defect = linalg::hermitian_defect(f.as_ref());
        if defect > 1e-10 * scale {
            return Err(Error::precondition("reference operator must be hermitian", defect));
        }
        let (vals, vecs) = linalg::hermitian_eigen(f.as_ref())?;
        Ok(Self::from_spectrum(vals, Some(vecs)))
    }

    pub fn diagonal(values: Vec<f64>) -> Self {
        Self::from_spectrum(values, None)
    }

    pub fn for_reference(grid: &Grid, h: f64, reference: Reference) -> Result<Self> {
        match reference {
            Reference::Position => Ok(Self::diagonal(grid.nodes())),
            Reference::Dilation => Self::new(&quantize::dilation_generator(grid, h).to_dense()),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Coordinates in the eigenbasis.
    pub fn coefficients(&self, u: &[C64]) -> Vec<C64> {
        match &self.basis {
            None => u.to_vec(),
            Some(v) => {
                let n = v.nrows();
                (0..v.ncols()).map(|k| (0..n).map(|i| v[(i, k)].conj() * u[i]).sum()).collect()
            }
        }
    }

    /// ‖1_{Ω_j}(F)u‖ for every block.
    pub fn block_norms(&self, u: &[C64]) -> Vec<f64> {
        let c = self.coefficients(u);
        self.blocks.iter().map(|b| b.iter().map(|&i| c[i].norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    /// M in eigen coordinates: V* M V.
    pub fn transform(&self, m: &Mat<C64>) -> Mat<C64> {
        match &self.basis {
            None => m.clone(),
            Some(v) => v.adjoint() * (m * v),
        }
    }

    /// 1_{Ω_j}(F) as a dense matrix.
    pub fn projection(&self, j: usize) -> Mat<C64> {
        let n = self.dim();
        let idx = self.blocks.get(j).cloned().unwrap_or_default();
        match &self.basis {
            None => {
                let mut p = Mat::<C64>::zeros(n, n);
                for i in idx {
                    p[(i, i)] = C64::from(1.0);
                }
                p
            }
            Some(v) => {
                let sub = Mat::from_fn(n, idx.len(), |r, c| v[(r, idx[c])]);
                &sub * sub.adjoint()
            }
        }
    }

    /// Vector with the given eigen coordinates.
    pub fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        match &self.basis {
            None => c.to_vec(),
            Some(v) => linalg::dense_matvec(v.as_ref(), c),
        }
    }
}

pub fn besov_norm(u: &[C64], dec: &DyadicDecomposition, s: f64) -> f64 {
    dec.block_norms(u).iter().enumerate().map(|(j, n)| 2f64.powf(j as f64 * s) * n).sum()
}

pub fn dual_norm(v: &[C64], dec: &DyadicDecomposition, s: f64) -> f64 {
    dec.block_norms(v).iter().enumerate().map(|(j, n)| 2f64.powf(-(j as f64) * s) * n).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockNorm {
    pub j: usize,
    pub k: usize,
    pub block_norm: f64,
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovOperatorNorm {
    pub value: f64,
    pub argmax: (usize, usize),
    pub blocks: Vec<BlockNorm>,
}

fn sub_block(m: &Mat<C64>, rows: &[usize], cols: &[usize]) -> Mat<C64> {
    Mat::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// max_{j,k} 2^{−(j+k)s}‖1_{Ω_j} M 1_{Ω_k}‖ over nonempty blocks.
pub fn operator_norm_bs(m: &Mat<C64>, dec: &DyadicDecomposition, s: f64) -> Result<BesovOperatorNorm> {
    if m.nrows() != dec.dim() || m.ncols() != dec.dim() {
        return Err(Error::precondition("matrix size differs from the decomposition", m.nrows() as f64));
    }
    let mt = dec.transform(m);
    operator_norm_transformed(&mt, dec, s)
}

fn operator_norm_transformed(mt: &Mat<C64>, dec: &DyadicDecomposition, s: f64) -> Result<BesovOperatorNorm> {
    let pairs: Vec<(usize, usize)> = (0..dec.block_count())
        .flat_map(|j| (0..dec.block_count()).map(move |k| (j, k)))
        .filter(|&(j, k)| !dec.blocks[j].is_empty() && !dec.blocks[k].is_empty())
        .collect();
    let blocks: Vec<BlockNorm> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let b = sub_block(mt, &dec.blocks[j], &dec.blocks[k]);
            let block_norm = linalg::spectral_norm(b.as_ref())?;
            Ok(BlockNorm { j, k, block_norm, weighted: 2f64.powf(-((j + k) as f64) * s) * block_norm })
        })
        .collect::<Result<_>>()?;
    let best = blocks
        .iter()
        .max_by(|a, b| a.weighted.total_cmp(&b.weighted))
        .ok_or_else(|| Error::precondition("empty decomposition", 0.0))?;
    Ok(BesovOperatorNorm { value: best.weighted, argmax: (best.j, best.k), blocks })
}

/// ‖Mu‖_{B_s*}/‖u‖_{B_s}
pub fn besov_ratio(m: &Mat<C64>, dec: &DyadicDecomposition, s: f64, u: &[C64]) -> f64 {
    let mu = linalg::dense_matvec(m.as_ref(), u);
    dual_norm(&mu, dec, s) / besov_norm(u, dec, s)
}

/// Top right singular vector of the maximizing block, embedded in block k.
pub fn extremal_vector(m: &Mat<C64>, dec: &DyadicDecomposition, s: f64) -> Result<Vec<C64>> {
    let norm = operator_norm_bs(m, dec, s)?;
    let (j, k) = norm.argmax;
    let mt = dec.transform(m);
    let b = sub_block(&mt, &dec.blocks[j], &dec.blocks[k]);
    let svd = b.thin_svd().map_err(|e| Error::DiagonalizationFailed(format!("{e:?}")))?;
    let v = svd.V();
    let mut c = vec![ZERO; dec.dim()];
    for (r, &i) in dec.blocks[k].iter().enumerate() {
        c[i] = v[(r, 0)];
    }
    Ok(dec.synthesize(&c))
}

/// Largest ratio over random vectors with a random number of active blocks.
pub fn randomized_lower_bound(m: &Mat<C64>, dec: &DyadicDecomposition, s: f64, samples: usize, rng: &mut impl Rng) -> f64 {
    let n = dec.dim();
    let nb = dec.block_count();
    let mut best = 0.0f64;
    for _ in 0..samples {
        let keep = rng.gen_range(0..nb);
        let mut c: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        if rng.gen_bool(0.5) {
            for (i, ci) in c.iter_mut().enumerate() {
                if dec.block_of[i] != keep {
                    *ci = ZERO;
                }
            }
        }
        if linalg::norm(&c) == 0.0 {
            continue;
        }
        best = best.max(besov_ratio(m, dec, s, &dec.synthesize(&c)));
    }
    best
}

/// Inclusion constants for the position reference:
/// ‖M‖_{B_s→B_s*} ≤ `upper`·‖⟨x⟩⁻ˢM⟨x⟩⁻ˢ‖ and ‖⟨x⟩^{−s'}M⟨x⟩^{−s'}‖ ≤ `lower`·‖M‖_{B_s→B_s*}.
pub fn position_inclusion_constants(s: f64, s_prime: f64, blocks: usize) -> (f64, f64) {
    let upper = 2f64.powf(s);
    let cb: f64 = (0..blocks.max(1))
        .map(|j| if j == 0 { 1.0 } else { 2f64.powf(j as f64 * s - (j as f64 - 1.0) * s_prime) })
        .sum();
    (upper, cb * cb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSweepSetup {
    pub potential: Potential,
    pub grid: Grid,
    pub hamiltonian: HamiltonianConfig,
    pub nu_law: NuLaw,
    pub interval: (f64, f64),
    pub re_points: usize,
    pub mu: f64,
    pub s: f64,
    pub reference: Reference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSample {
    pub h: f64,
    pub re_z: f64,
    pub im_z: f64,
    pub norm: f64,
    pub argmax: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSweepResult {
    pub samples: Vec<BesovSample>,
    /// sup over z per h
    pub sup_norms: Vec<(f64, f64)>,
    /// slope of log sup-norm against log 1/(hν̃)
    pub slope: f64,
    pub fit_residual: f64,
}

/// (H − z)⁻¹ as a dense matrix.
pub fn dense_resolvent(op: &DiscreteOperator, z: C64) -> Result<Mat<C64>> {
    let n = op.dim();
    ResolventSolver::new(op, z)?.solve_matrix(&Mat::<C64>::identity(n, n))
}

pub fn resolvent_besov_sweep(setup: &BesovSweepSetup, h_list: &[f64]) -> Result<BesovSweepResult> {
    if setup.s < 0.5 {
        return Err(Error::precondition("s must be at least 1/2", setup.s));
    }
    if setup.re_points == 0 || !(setup.mu > 0.0) {
        return Err(Error::precondition("need at least one Re z and Im z > 0", setup.mu));
    }
    let (a, b) = setup.interval;
    let res: Vec<f64> = (0..setup.re_points)
        .map(|k| if setup.re_points == 1 { 0.5 * (a + b) } else { a + (b - a) * k as f64 / (setup.re_points - 1) as f64 })
        .collect();
    let mut samples = Vec::new();
    let mut sup_norms = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &h in h_list {
        let params = SemiclassicalParams::new(h, setup.nu_law.clone())?;
        let (_, op) = quantize::build_hamiltonian(&setup.grid, &setup.potential, &params, &setup.hamiltonian)?;
        let dec = DyadicDecomposition::for_reference(&setup.grid, h, setup.reference)?;
        let mut sup = 0.0f64;
        for &re in &res {
            let z = C64::new(re, setup.mu);
            let r = dense_resolvent(&op, z)?;
            let norm = operator_norm_bs(&r, &dec, setup.s)?;
            sup = sup.max(norm.value);
            samples.push(BesovSample { h, re_z: re, im_z: setup.mu, norm: norm.value, argmax: norm.argmax });
        }
        sup_norms.push((h, sup));
        xs.push(params.scaling_variable().ln());
        ys.push(sup.ln());
    }
    let (slope, _, fit_residual) = if xs.len() >= 2 { linalg::linear_fit(&xs, &ys) } else { (f64::NAN, f64::NAN, f64::NAN) };
    Ok(BesovSweepResult { samples, sup_norms, slope, fit_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_boundaries() {
        assert_eq!(block_index(0.5), 0);
        assert_eq!(block_index(1.0), 0);
        assert_eq!(block_index(1.5), 1);
        assert_eq!(block_index(-2.0), 1);
        assert_eq!(block_index(2.0 + 1e-9), 2);
        assert_eq!(block_index(3.99), 2);
        assert_eq!(block_index(1024.0), 10);
    }

    #[test]
    fn eigenvector_norms() {
        let dec = DyadicDecomposition::diagonal(vec![0.3, 1.5, 5.0]);
        let u = vec![ZERO, C64::from(1.0), ZERO];
        assert!((besov_norm(&u, &dec, 1.0) - 2.0).abs() < 1e-15);
        assert!((dual_norm(&u, &dec, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(besov_norm(&[ZERO; 3], &dec, 1.0), 0.0);
    }

    #[test]
    fn identity_has_unit_norm() {
        let dec = DyadicDecomposition::diagonal(vec![0.3, 1.5, 5.0, -7.0]);
        let r = operator_norm_bs(&Mat::<C64>::identity(4, 4), &dec, 0.5).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14 && r.argmax == (0, 0));
    }

    #[test]
    fn weights_cancel_on_rank_one_cross_block() {
        let dec = DyadicDecomposition::diagonal(vec![0.3, 1.5, 5.0]);
        let s = 0.7;
        let mut m = Mat::<C64>::zeros(3, 3);
        m[(2, 1)] = C64::from(2f64.powf(3.0 * s) * 2f64.powf(s));
        assert!((operator_norm_bs(&m, &dec, s).unwrap().value - 1.0).abs() < 1e-13);
    }
}
