use dissipa_core::flow::{self, FlowParams, PhasePoint};
use dissipa_core::potential::{DampingShape, Potential, PotentialShape};
use proptest::prelude::*;

fn trap() -> Potential {
    Potential::new(
        PotentialShape::DoubleBarrier { separation: 2.0, height: 2.0, width: 0.25 },
        DampingShape::WellCentered { amplitude: 1.0, width: 0.75 },
    )
}

fn short() -> FlowParams {
    FlowParams { dt: 1e-3, t_max: 5.0, r_escape: 1e6, ..FlowParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_conserved(x in -3.0f64..3.0, xi in -2.0f64..2.0) {
        let tr = flow::integrate_flow(PhasePoint::new(x, xi), &trap(), &short()).unwrap();
        prop_assert!(tr.max_energy_drift <= 1e-8, "drift {}", tr.max_energy_drift);
    }

    #[test]
    fn damping_factors(x in -3.0f64..3.0, xi in -2.0f64..2.0) {
        let tr = flow::integrate_flow(PhasePoint::new(x, xi), &trap(), &short()).unwrap();
        for (q, q1) in tr.q_values.iter().zip(&tr.q1_values) {
            prop_assert!(*q > 0.0 && *q <= 1.0);
            prop_assert!((q1 * q1 - q).abs() <= 1e-10);
        }
    }

    #[test]
    fn flow_is_reversible(x in -3.0f64..3.0, xi in -2.0f64..2.0, t in 0.1f64..3.0) {
        let pot = trap();
        let w = PhasePoint::new(x, xi);
        let there = flow::flow_map(w, t, &pot, 1e-3).unwrap();
        let back = flow::flow_map(there, -t, &pot, 1e-3).unwrap();
        prop_assert!(back.distance(&w) < 1e-9, "{:?} vs {:?}", back, w);
    }

    #[test]
    fn flow_composes(x in -3.0f64..3.0, xi in -2.0f64..2.0) {
        let pot = trap();
        let w = PhasePoint::new(x, xi);
        let direct = flow::flow_map(w, 2.0, &pot, 1e-3).unwrap();
        let mid = flow::flow_map(w, 1.0, &pot, 1e-3).unwrap();
        let two = flow::flow_map(mid, 1.0, &pot, 1e-3).unwrap();
        prop_assert!(direct.distance(&two) < 1e-9);
    }
}

#[test]
fn constant_damping_integral() {
    let pot = Potential::free().with_damping(DampingShape::Constant { value: 0.5 });
    let (_, fwd) = flow::flow_with_damping(PhasePoint::new(0.3, 1.0), 2.0, &pot, 1e-3).unwrap();
    let (_, bwd) = flow::flow_with_damping(PhasePoint::new(0.3, 1.0), -2.0, &pot, 1e-3).unwrap();
    assert!((fwd - 1.0).abs() < 1e-12 && (bwd - 1.0).abs() < 1e-12);
}

#[test]
fn free_particle_moves_at_twice_its_momentum() {
    let w = flow::flow_map(PhasePoint::new(-1.0, 0.75), 4.0, &Potential::free(), 1e-2).unwrap();
    assert!((w.x - 5.0).abs() < 1e-12 && (w.xi - 0.75).abs() < 1e-14);
}

#[test]
fn trapped_orbit_is_bounded_and_escaping_one_is_not() {
    let pot = trap();
    let params = FlowParams { r_escape: 4.0, ..FlowParams::default() };
    let inside = flow::classify_trajectory(PhasePoint::new(0.0, 1.0), &pot, &params).unwrap();
    assert!(inside.bounded_future() && inside.bounded_past());
    let outside = flow::classify_trajectory(PhasePoint::new(0.0, 2.0), &pot, &params).unwrap();
    assert!(!outside.bounded_future() && !outside.bounded_past());
}
