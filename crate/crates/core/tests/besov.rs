use dissipa_core::acceptance;
use dissipa_core::besov::{self, DyadicDecomposition};
use dissipa_core::linalg::{self, C64};
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(n: usize, rng: &mut impl Rng) -> Mat<C64> {
    Mat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_vector(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pairing_is_bounded_by_the_dual_norm(seed in 0u64..10_000, s in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dec, _) = acceptance::random_besov_instance(24, &mut rng).unwrap();
        let u = random_vector(24, &mut rng);
        let v = random_vector(24, &mut rng);
        let pairing = linalg::dot(&v, &u).norm();
        prop_assert!(pairing <= besov::dual_norm(&v, &dec, s) * besov::besov_norm(&u, &dec, s) * (1.0 + 1e-12));
    }

    #[test]
    fn projections_resolve_the_identity(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dec, _) = acceptance::random_besov_instance(20, &mut rng).unwrap();
        let mut sum = Mat::<C64>::zeros(20, 20);
        for j in 0..dec.block_count() {
            let p = dec.projection(j);
            let p2 = &p * &p;
            let idem = Mat::from_fn(20, 20, |a, b| p2[(a, b)] - p[(a, b)]);
            prop_assert!(linalg::max_abs(idem.as_ref()) < 1e-10);
            sum = &sum + &p;
        }
        let defect = Mat::from_fn(20, 20, |a, b| sum[(a, b)] - if a == b { C64::from(1.0) } else { C64::from(0.0) });
        prop_assert!(linalg::max_abs(defect.as_ref()) < 1e-10);
    }

    #[test]
    fn operator_norm_is_nonincreasing_in_s(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dec, m) = acceptance::random_besov_instance(24, &mut rng).unwrap();
        let mut last = f64::INFINITY;
        for s in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let v = besov::operator_norm_bs(&m, &dec, s).unwrap().value;
            prop_assert!(v <= last * (1.0 + 1e-12));
            last = v;
        }
    }

    #[test]
    fn random_vectors_never_beat_the_formula(seed in 0u64..10_000, s in 0.0f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dec, m) = acceptance::random_besov_instance(32, &mut rng).unwrap();
        let formula = besov::operator_norm_bs(&m, &dec, s).unwrap().value;
        let lower = besov::randomized_lower_bound(&m, &dec, s, 200, &mut rng);
        prop_assert!(lower <= formula * (1.0 + 1e-12));
        let u = besov::extremal_vector(&m, &dec, s).unwrap();
        prop_assert!(besov::besov_ratio(&m, &dec, s, &u) >= 0.99 * formula);
    }
}

#[test]
fn one_dimensional_blocks_reduce_to_weighted_entries() {
    // each eigenvalue alone in its block: the norm is the largest weighted entry
    let dec = DyadicDecomposition::diagonal(vec![0.5, 1.5, 3.0, 6.0, -12.0]);
    assert_eq!(dec.block_of, vec![0, 1, 2, 3, 4]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_matrix(5, &mut rng);
    for s in [0.0, 0.5, 1.0] {
        let mut want = 0.0f64;
        for j in 0..5 {
            for k in 0..5 {
                want = want.max(2f64.powf(-((j + k) as f64) * s) * m[(j, k)].norm());
            }
        }
        let got = besov::operator_norm_bs(&m, &dec, s).unwrap().value;
        assert!((got - want).abs() < 1e-12 * want);
    }
}

#[test]
fn block_boundaries() {
    assert_eq!(besov::block_index(0.0), 0);
    assert_eq!(besov::block_index(-1.0), 0);
    assert_eq!(besov::block_index(1.0 + 1e-13), 0);
    assert_eq!(besov::block_index(1.5), 1);
    assert_eq!(besov::block_index(2.0), 1);
    assert_eq!(besov::block_index(2.1), 2);
    assert_eq!(besov::block_index(1024.0), 10);
}

#[test]
fn position_reference_inclusions() {
    let n = 64;
    let nodes: Vec<f64> = (0..n).map(|i| -8.0 + 16.0 * i as f64 / (n - 1) as f64).collect();
    let dec = DyadicDecomposition::diagonal(nodes.clone());
    let (s, s_prime) = (0.5, 1.0);
    let (upper, lower) = besov::position_inclusion_constants(s, s_prime, dec.block_count());
    let weighted = |m: &Mat<C64>, p: f64| {
        let w: Vec<f64> = nodes.iter().map(|x| (1.0 + x * x).powf(-0.5 * p)).collect();
        let wm = Mat::from_fn(n, n, |i, j| m[(i, j)] * (w[i] * w[j]));
        linalg::spectral_norm(wm.as_ref()).unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let m = random_matrix(n, &mut rng);
        let b = besov::operator_norm_bs(&m, &dec, s).unwrap().value;
        assert!(b <= upper * weighted(&m, s) * (1.0 + 1e-12));
        assert!(weighted(&m, s_prime) <= lower * b * (1.0 + 1e-12));
    }
}
