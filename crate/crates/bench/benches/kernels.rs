use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dissipa_core::flow::{self, PhasePoint};
use dissipa_core::linalg::{self, LanczosOptions, C64};
use dissipa_core::potential::{DampingShape, Potential};
use dissipa_core::quantize::{self, Grid, HamiltonianConfig, NuLaw, SemiclassicalParams, Storage, StencilOrder, Symbol};
use dissipa_core::resolvent;
use dissipa_core::scenario;

fn hamiltonian(n: usize, stencil: StencilOrder) -> quantize::DiscreteOperator {
    let grid = Grid::new(-6.0, 6.0, n).unwrap();
    let pot = Potential::free().with_damping(DampingShape::WellCentered { amplitude: 1.0, width: 0.75 });
    let params = SemiclassicalParams::new(1.0 / 16.0, NuLaw::Linear).unwrap();
    let cfg = HamiltonianConfig { stencil, sponge: None, e_max: None };
    quantize::build_hamiltonian(&grid, &pot, &params, &cfg).unwrap().1
}

fn band_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("band_lu");
    for n in [512usize, 2048, 8192] {
        let op = hamiltonian(n, StencilOrder::Fourth);
        let Storage::Banded(m) = &op.storage else { panic!("expected banded storage") };
        let mut shifted = m.clone();
        shifted.add_diagonal(&vec![C64::new(-1.0, -1e-3); n]);
        let f = linalg::seeded_unit_vector(n, 1);
        g.bench_with_input(BenchmarkId::new("factor_solve", n), &n, |b, _| {
            b.iter(|| {
                let lu = shifted.lu().unwrap();
                let mut x = f.clone();
                lu.solve_in_place(&mut x);
                black_box(x)
            })
        });
        let lu = shifted.lu().unwrap();
        g.bench_with_input(BenchmarkId::new("solve", n), &n, |b, _| {
            b.iter(|| {
                let mut x = f.clone();
                lu.solve_in_place(&mut x);
                black_box(x)
            })
        });
    }
    g.finish();
}

fn weyl(c: &mut Criterion) {
    let sym = Symbol::function("g", |x, xi| (-x * x - xi * xi).exp());
    let mut g = c.benchmark_group("weyl_quantize");
    g.sample_size(10);
    for n in [128usize, 256] {
        let grid = Grid::new(-4.0, 4.0, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(quantize::weyl_quantize(&grid, &sym, 0.25).unwrap())));
    }
    g.finish();
}

fn flow_step(c: &mut Criterion) {
    let pot = scenario::scenario("trap").unwrap().resolve().unwrap().potential;
    c.bench_function("flow_step", |b| {
        b.iter(|| black_box(flow::step(black_box(PhasePoint::new(0.3, 0.8)), &pot, 1e-3)))
    });
    c.bench_function("flow_with_damping_t10", |b| {
        b.iter(|| black_box(flow::flow_with_damping(PhasePoint::new(0.3, 0.8), 10.0, &pot, 1e-3).unwrap()))
    });
}

fn lanczos(c: &mut Criterion) {
    let mut g = c.benchmark_group("weighted_resolvent_norm");
    g.sample_size(10);
    for n in [512usize, 2048] {
        let op = hamiltonian(n, StencilOrder::Second);
        let grid = Grid::new(-6.0, 6.0, n).unwrap();
        let w = quantize::weights(&grid, 1.0);
        let z = C64::new(1.0, 1e-3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(resolvent::weighted_norm(&op, &w, z).unwrap())));
    }
    g.finish();
    let n = 1024;
    let diag: Vec<C64> = (0..n).map(|i| C64::from(1.0 + i as f64 / n as f64)).collect();
    c.bench_function("lanczos_norm_diag_1024", |b| {
        b.iter(|| {
            let apply = |v: &[C64]| Ok(v.iter().zip(&diag).map(|(a, d)| a * d).collect());
            let adj = |v: &[C64]| Ok(v.iter().zip(&diag).map(|(a, d)| a * d.conj()).collect());
            black_box(linalg::lanczos_norm(n, apply, adj, LanczosOptions::default()).unwrap())
        })
    });
}

criterion_group!(benches, band_solve, weyl, flow_step, lanczos);
criterion_main!(benches);
