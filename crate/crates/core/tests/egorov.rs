use dissipa_core::egorov::{self, ChiWindow, EgorovSetup, PhaseSymbol, PropagationMethod, Propagator, PropagatorPlan, SmoothingSetup};
use dissipa_core::linalg;
use dissipa_core::potential::{DampingShape, Potential, PotentialShape};
use dissipa_core::quantize::{self, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams, StencilOrder, Symbol};
use faer::Mat;
use proptest::prelude::*;

fn well() -> Potential {
    Potential::new(
        PotentialShape::GaussianBump { amplitude: -1.0, width: 1.0 },
        DampingShape::WellCentered { amplitude: 1.0, width: 0.75 },
    )
}

fn banded_well(h: f64) -> (Grid, quantize::DiscreteOperator) {
    let grid = Grid::new(-5.0, 5.0, 256).unwrap();
    let params = SemiclassicalParams::new(h, NuLaw::Linear).unwrap();
    let cfg = HamiltonianConfig { stencil: StencilOrder::Second, sponge: None, e_max: None };
    let (_, op) = quantize::build_hamiltonian(&grid, &well(), &params, &cfg).unwrap();
    (grid, op)
}

#[test]
fn position_is_transported_exactly_by_free_motion() {
    let setup = EgorovSetup::standard(Potential::free());
    for h in [1.0 / 8.0, 1.0 / 16.0] {
        let row = egorov::egorov_error(&setup, &PhaseSymbol::Position, 0.25, h).unwrap();
        assert!(row.error < 1e-8 && row.mixed_error < 1e-8, "h = {h}: {row:?}");
    }
}

#[test]
fn unit_symbol_error_shrinks_with_h() {
    let setup = EgorovSetup::standard(well());
    let coarse = egorov::egorov_error(&setup, &PhaseSymbol::Unit, 1.0, 1.0 / 8.0).unwrap();
    let fine = egorov::egorov_error(&setup, &PhaseSymbol::Unit, 1.0, 1.0 / 16.0).unwrap();
    assert!(fine.error < 0.6 * coarse.error, "{coarse:?} {fine:?}");
    assert!(coarse.error < 0.01);
}

#[test]
fn midpoint_agrees_with_eigendecomposition() {
    let h = 0.25;
    let (grid, op) = banded_well(h);
    let psi = egorov::coherent_state(&grid, h, -1.0, 0.5);
    let exact = egorov::propagate(&op, &PropagatorPlan::eigen(h, 1.0), &psi).unwrap();
    let plan = PropagatorPlan { method: PropagationMethod::ImplicitMidpoint, dt_quantum: 1e-3, t_final: 1.0, h };
    let cn = egorov::propagate(&op, &plan, &psi).unwrap();
    assert!(linalg::norm(&linalg::sub(&exact, &cn)) < 1e-4);
}

#[test]
fn heisenberg_is_linear_in_the_symbol() {
    let h = 0.25;
    let (grid, op) = banded_well(h);
    let plan = PropagatorPlan::eigen(h, 0.5);
    let a = egorov::heisenberg(&op, &grid, &plan, &Symbol::position(), 0.5).unwrap();
    let b = egorov::heisenberg(&op, &grid, &plan, &Symbol::momentum(), 0.5).unwrap();
    let sum = Symbol::Polynomial {
        name: "2x - xi".into(),
        c0: Some(std::sync::Arc::new(|x| 2.0 * x)),
        c1: Some(std::sync::Arc::new(|_| -1.0)),
        c2: None,
    };
    let c = egorov::heisenberg(&op, &grid, &plan, &sum, 0.5).unwrap();
    let diff = Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] - a[(i, j)] * 2.0 + b[(i, j)]);
    assert!(linalg::max_abs(diff.as_ref()) < 1e-9 * linalg::max_abs(c.as_ref()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_a_contraction(x0 in -2.0f64..2.0, xi0 in -1.0f64..1.0, t in 0.1f64..2.0) {
        let h = 0.25;
        let (grid, op) = banded_well(h);
        let prop = Propagator::new(&op, &PropagatorPlan::eigen(h, t)).unwrap();
        let psi = egorov::coherent_state(&grid, h, x0, xi0);
        let half = prop.apply(&psi, 0.5 * t).unwrap();
        let full = prop.apply(&psi, t).unwrap();
        prop_assert!(linalg::norm(&half) <= 1.0 + 1e-10);
        prop_assert!(linalg::norm(&full) <= linalg::norm(&half) + 1e-10);
        let twice = prop.apply(&half, 0.5 * t).unwrap();
        prop_assert!(linalg::norm(&linalg::sub(&twice, &full)) < 1e-9);
    }
}

#[test]
fn packet_outside_the_window_contributes_nothing() {
    let mut setup = SmoothingSetup::standard(Potential::free());
    setup.grid = Grid::new(-8.0, 8.0, 1024).unwrap();
    let h = 1.0 / 8.0;
    let chi = ChiWindow::new(0.5, 1.5);
    let inside = egorov::smoothing_value(&setup, &chi, 1.0, &egorov::wave_packet(&setup.grid, h, -2.0, 1.0, 0.7), 30.0, h).unwrap();
    let outside = egorov::smoothing_value(&setup, &chi, 1.0, &egorov::wave_packet(&setup.grid, h, -2.0, 3.0, 0.7), 30.0, h).unwrap();
    assert!(inside.value > 0.1, "{inside:?}");
    assert!(outside.value < 1e-10 * inside.value, "{outside:?}");
}

#[test]
fn chi_window_has_a_plateau() {
    let chi = ChiWindow::new(0.5, 1.5);
    assert_eq!(chi.eval(1.0), 1.0);
    assert_eq!(chi.eval(0.75), 1.0);
    assert_eq!(chi.eval(0.5), 0.0);
    assert_eq!(chi.eval(1.6), 0.0);
    assert!(chi.eval(0.6) > 0.0 && chi.eval(0.6) < 1.0);
}

#[test]
fn symbol_parsing() {
    assert_eq!(PhaseSymbol::parse("x", "k").unwrap(), PhaseSymbol::Position);
    assert_eq!(PhaseSymbol::parse("gaussian(0, 1, 0.5)", "k").unwrap(), PhaseSymbol::Gaussian { x0: 0.0, xi0: 1.0, sigma: 0.5 });
    assert!(PhaseSymbol::parse("gaussian(1)", "k").is_err());
}
