use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mzlab_core::operators::SquarePlan;
use mzlab_core::parallel::{current_threads, with_threads};
use mzlab_core::scenes::scene;
use mzlab_core::sphere::bank_kernel;
use mzlab_core::weights::{ainf_constant, power_weight, CubeBank};
use mzlab_core::{GridSpec, QuadratureSpec};

fn thread_counts() -> Vec<usize> {
    vec![1, current_threads().max(2)]
}

fn square_function(c: &mut Criterion) {
    let g = GridSpec::new(8.0, 128).unwrap();
    let qd = QuadratureSpec::for_grid(&g, 4).unwrap();
    let om = bank_kernel("cos").unwrap();
    let plan = SquarePlan::marcinkiewicz(&om, g, &qd).unwrap();
    let f = scene("two-bump", g).unwrap();
    let mut group = c.benchmark_group("marcinkiewicz_apply_n128");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || black_box(plan.apply(&f).unwrap())))
        });
    }
    group.finish();
}

fn weight_constants(c: &mut Criterion) {
    let g = GridSpec::new(8.0, 128).unwrap();
    let w = power_weight(1.0, 2.0, g).unwrap();
    let bank = CubeBank::standard(&g, 2000, 0);
    let mut group = c.benchmark_group("ainf_constant_n128");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || black_box(ainf_constant(&w, &bank).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, square_function, weight_constants);
criterion_main!(benches);
