use dissipa_core::dilation::{self, DilationState, DilationSystem, SemigroupOptions};
use dissipa_core::linalg::{self, C64};
use dissipa_core::potential::{DampingShape, Potential};
use dissipa_core::quantize::{Grid, StencilOrder};
use proptest::prelude::*;

fn interior(l: f64, spacing: f64) -> DilationSystem {
    let pot = Potential::free().with_damping(DampingShape::WellCentered { amplitude: 1.0, width: 0.75 });
    DilationSystem::from_potential(&Grid::new(-2.0, 2.0, 32).unwrap(), &pot, 0.5, StencilOrder::Second, l, spacing).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scalar_resolvent_matches_closed_form(lambda0 in -2.0f64..2.0, v in 0.1f64..2.0, re in -1.0f64..3.0, im in 0.5f64..2.0) {
        let h = 1.0;
        let sys = DilationSystem::scalar(lambda0, v, h, 40.0, 1e-2).unwrap();
        let z = C64::new(re, im);
        let psi = dilation::dilation_resolvent(&sys, z, &DilationState::interior(&sys, vec![C64::from(1.0)])).unwrap();
        let want = 1.0 / (C64::new(lambda0, -h * v) - z);
        prop_assert!((psi.phi_0[0] - want).norm() <= 1e-10 * want.norm());
    }
}

#[test]
fn interior_input_leaves_the_incoming_channel_empty() {
    let sys = interior(30.0, 1e-3);
    let z = C64::new(1.0, 0.5);
    let phi0 = linalg::seeded_unit_vector(sys.interior_dim(), 5);
    let psi = dilation::dilation_resolvent(&sys, z, &DilationState::interior(&sys, phi0.clone())).unwrap();
    assert!(linalg::max_abs(psi.phi_minus.as_ref()) == 0.0);
    let direct = quantize_solve(&sys, z, &phi0);
    assert!(linalg::norm(&linalg::sub(&psi.phi_0, &direct)) < 1e-10 * linalg::norm(&direct));
    let jump = linalg::sub(&psi.trace_plus(), &psi.trace_minus());
    for ((k, &i), w) in sys.omega.iter().enumerate().zip(&sys.w) {
        let want = C64::new(0.0, *w) * psi.phi_0[i];
        assert!((jump[k] - want).norm() < 1e-12);
    }
}

fn quantize_solve(sys: &DilationSystem, z: C64, f: &[C64]) -> Vec<C64> {
    dissipa_core::resolvent::solve(&sys.hamiltonian, z, f).unwrap()
}

#[test]
fn no_damping_means_no_channels() {
    let grid = Grid::new(-2.0, 2.0, 32).unwrap();
    let sys = DilationSystem::from_potential(&grid, &Potential::free(), 0.5, StencilOrder::Second, 30.0, 1e-3).unwrap();
    assert_eq!(sys.channel_count(), 0);
    assert!(sys.hamiltonian.hermitian_defect() < 1e-14);
    let rep = dilation::verify_resolvent_identity(&sys, &[C64::new(1.0, 0.5)], 4, 1).unwrap();
    assert!(rep.max_error < 1e-12);
}

#[test]
fn coupling_is_square_root_of_damping() {
    let sys = interior(30.0, 1e-3);
    for (&i, w) in sys.omega.iter().zip(&sys.w) {
        assert!(sys.v2[i] > dilation::CHANNEL_THRESHOLD);
        assert!((w - (2.0 * sys.h * sys.v2[i]).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn truncation_bound_envelopes_the_error() {
    let z = C64::new(1.0, 0.5);
    for l in [4.0, 8.0, 16.0] {
        let mut sys = interior(l, 1e-3);
        sys.truncation_tol = 1.0;
        let rep = dilation::verify_resolvent_identity(&sys, &[z], 4, 9).unwrap();
        let bound = (-z.im * l).exp();
        assert!(rep.max_error <= bound && rep.channel_error <= bound, "L = {l}: {rep:?}");
    }
}

#[test]
fn short_channel_is_rejected() {
    let sys = interior(4.0, 1e-3);
    assert!(matches!(
        dilation::dilation_resolvent(&sys, C64::new(1.0, 0.5), &DilationState::zeros(&sys)),
        Err(dissipa_core::Error::TruncationError { .. })
    ));
}

#[test]
fn semigroup_is_unitary_and_matches_the_contraction() {
    let sys = DilationSystem::scalar(1.0, 0.5, 1.0, 2.0, 1e-2).unwrap();
    let rep = dilation::verify_semigroup_dilation(&sys, &[0.0, 0.5, 1.0], 1, 3, &SemigroupOptions::default()).unwrap();
    assert!(rep.errors[0] < 1e-12);
    assert!(rep.max_error <= 1e-6, "{rep:?}");
    assert!(rep.hermitian_defect <= 1e-10);
    assert!(rep.norm_drift <= 1e-8);
    let k = dilation::momentum_dilation(&sys, 64, 1.0 / 6.0);
    assert!(linalg::hermitian_defect(k.as_ref()) <= 1e-12);
}

#[test]
fn front_reaching_the_channel_end_is_an_error() {
    let sys = DilationSystem::scalar(1.0, 0.5, 1.0, 2.0, 1e-2).unwrap();
    let res = dilation::verify_semigroup_dilation(&sys, &[1.95], 1, 3, &SemigroupOptions::default());
    assert!(matches!(res, Err(dissipa_core::Error::FrontReachedBoundary { .. })));
}

#[test]
fn refinement_reduces_the_channel_error() {
    let sys = interior(30.0, 2e-3);
    let study = dilation::refinement_study(&sys, C64::new(1.0, 0.5), 3, 4).unwrap();
    assert!(study.windows(2).all(|w| w[1].1 < w[0].1), "{study:?}");
}
