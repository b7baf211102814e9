use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use delone_bench::model;
use delone_core::linalg::EigenMethod;
use delone_core::msa::{is_good_box, GoodBoxParams};
use delone_core::rng::trial_rng;
use delone_core::spectral::{ground_state, lowest, resolvent_norm};

fn assembly(c: &mut Criterion) {
    let m = model(1, 400.0, 1);
    let mut g = c.benchmark_group("assemble_1d");
    for side in [20.0, 80.0, 320.0] {
        let grid = m.grid(&[0.0], side).unwrap();
        let omega = m.sample(&grid, &mut trial_rng(1, 0)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| m.hamiltonian(black_box(&grid), black_box(&omega)).unwrap())
        });
    }
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let m = model(1, 400.0, 2);
    let mut g = c.benchmark_group("ground_state_1d");
    g.sample_size(20);
    // 200 nodes goes to the dense solver, the others to Lanczos.
    for side in [5.0, 20.0, 80.0] {
        let grid = m.grid(&[0.0], side).unwrap();
        let h = m.hamiltonian(&grid, &m.sample(&grid, &mut trial_rng(2, 0)).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| ground_state(black_box(&h)).unwrap())
        });
    }
    g.finish();

    let m2 = model(2, 16.0, 3);
    let grid = m2.grid(&[0.0, 0.0], 1.5).unwrap();
    let h = m2.hamiltonian(&grid, &m2.sample(&grid, &mut trial_rng(3, 0)).unwrap()).unwrap();
    c.bench_function("lowest5_2d_side1.5", |b| b.iter(|| lowest(black_box(&h), 5, EigenMethod::Auto).unwrap()));
}

fn resolvent(c: &mut Criterion) {
    let m = model(1, 400.0, 4);
    let grid = m.grid(&[0.0], 40.0).unwrap();
    let h = m.hamiltonian(&grid, &m.sample(&grid, &mut trial_rng(4, 0)).unwrap()).unwrap();
    let (l0, _) = ground_state(&h).unwrap();
    c.bench_function("resolvent_norm_1d_L40", |b| {
        b.iter(|| resolvent_norm(black_box(&h), l0 - 0.1).unwrap())
    });
    let params = GoodBoxParams::new(l0 - 0.1, 0.05, 0.5, 10).unwrap();
    let mut g = c.benchmark_group("good_box_1d_L40");
    g.sample_size(20);
    g.bench_function("below_spectrum", |b| b.iter(|| is_good_box(black_box(&h), &params).unwrap()));
    g.finish();
}

criterion_group!(benches, assembly, eigen, resolvent);
criterion_main!(benches);
