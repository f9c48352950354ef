use dissipa_core::linalg::{self, C64};
use dissipa_core::potential::{DampingShape, Potential};
use dissipa_core::quantize::{self, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams, StencilOrder};
use dissipa_core::resolvent;
use faer::Mat;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_operator() -> (Grid, quantize::DiscreteOperator) {
    let grid = Grid::new(-3.0, 3.0, 96).unwrap();
    let pot = Potential::free().with_damping(DampingShape::WellCentered { amplitude: 1.0, width: 0.75 });
    let params = SemiclassicalParams::new(0.25, NuLaw::Linear).unwrap();
    let cfg = HamiltonianConfig { stencil: StencilOrder::Second, sponge: None, e_max: None };
    let (_, h) = quantize::build_hamiltonian(&grid, &pot, &params, &cfg).unwrap();
    (grid, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_estimate_holds(dim in 2usize..24, seed in 0u64..10_000, re in -1.0f64..1.0, im in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t_r, t_i, b, q) = resolvent::random_dissipative_instance(dim, &mut rng).unwrap();
        let e = resolvent::quadratic_estimate_check(&t_r, &t_i, &b, &q, C64::new(re, im)).unwrap();
        prop_assert!(e.lhs <= e.rhs + 1e-10, "{} > {}", e.lhs, e.rhs);
    }

    #[test]
    fn solve_obeys_the_dissipative_bound(re in 0.0f64..2.0, im in 1e-3f64..1.0, seed in 0u64..1000) {
        let (_, op) = small_operator();
        let f = linalg::seeded_unit_vector(op.dim(), seed);
        let u = resolvent::solve(&op, C64::new(re, im), &f).unwrap();
        prop_assert!(linalg::norm(&u) * im <= 1.0 + 1e-10);
    }
}

#[test]
fn solve_matches_dense_inverse() {
    let (_, op) = small_operator();
    let z = C64::new(1.0, 0.05);
    let n = op.dim();
    let shifted = Mat::from_fn(n, n, |i, j| op.to_dense()[(i, j)] - if i == j { z } else { C64::from(0.0) });
    let inv = linalg::dense_inverse(shifted.as_ref());
    let f = linalg::seeded_unit_vector(n, 3);
    let want = linalg::dense_matvec(inv.as_ref(), &f);
    let got = resolvent::solve(&op, z, &f).unwrap();
    assert!(linalg::norm(&linalg::sub(&got, &want)) < 1e-10 * linalg::norm(&want));
}

#[test]
fn weighted_norm_matches_svd() {
    let (grid, op) = small_operator();
    let z = C64::new(0.8, 0.02);
    let w = quantize::weights(&grid, 1.0);
    let n = op.dim();
    let dense = op.to_dense();
    let shifted = Mat::from_fn(n, n, |i, j| dense[(i, j)] - if i == j { z } else { C64::from(0.0) });
    let inv = linalg::dense_inverse(shifted.as_ref());
    let m = Mat::from_fn(n, n, |i, j| inv[(i, j)] * (w[i] * w[j]));
    let want = linalg::spectral_norm(m.as_ref()).unwrap();
    let got = resolvent::weighted_norm(&op, &w, z).unwrap();
    assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
}

#[test]
fn aitken_is_exact_on_geometric_sequences() {
    let f = |k: i32| 3.0 + 0.7 * 0.4f64.powi(k);
    assert!((resolvent::extrapolate_three(f(0), f(1), f(2)) - 3.0).abs() < 1e-12);
}

#[test]
fn bound_tally_records_solves() {
    let (_, op) = small_operator();
    let before = resolvent::resolvent_bound_tally().checks;
    resolvent::solve(&op, C64::new(1.0, 0.1), &linalg::seeded_unit_vector(op.dim(), 1)).unwrap();
    let after = resolvent::resolvent_bound_tally();
    assert!(after.checks > before && after.violations == 0);
}

#[test]
fn lap_limit_is_stable_on_a_small_grid() {
    let (grid, op) = small_operator();
    let w = quantize::weights(&grid, 1.0);
    let rep = resolvent::limiting_absorption_scan(&op, &w, 1.0, 1.0, &[0.04, 0.02, 0.01, 0.005], None).unwrap();
    assert!(rep.increments_decreasing);
    assert!(rep.extrapolated_norm.is_finite() && rep.extrapolated_norm > 0.0);
}
