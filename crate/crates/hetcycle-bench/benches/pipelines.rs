use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hetcycle::bifurcation::{self, Side, SweepOptions};
use hetcycle::horseshoe;
use hetcycle::model::presets;

fn certification(c: &mut Criterion) {
    let p = presets::case5_horseshoe();
    c.bench_function("certify_case5", |b| b.iter(|| horseshoe::certify_horseshoe(black_box(&p), None, 9).unwrap()));
}

fn curves(c: &mut Criterion) {
    let p = presets::case5_curves();
    let ns: Vec<i64> = (1..=7).collect();
    c.bench_function("home_roots_7", |b| b.iter(|| bifurcation::home_roots(&p, black_box(-1e-4), &ns, 0.1).unwrap()));
    let p4 = presets::case4();
    let betas: Vec<f64> = (0..13).map(|i| 1e-5 * 10f64.powf(i as f64 / 4.0)).collect();
    c.bench_function("homp_curve_13", |b| b.iter(|| bifurcation::homp_curve(&p4, black_box(&betas)).unwrap()));
    let mut g = c.benchmark_group("tangencies");
    g.sample_size(10);
    g.bench_function("hompn_case4_n2", |b| {
        b.iter(|| bifurcation::hompn_tangencies(&p4, &[2], black_box(1e-2), Side::Above).unwrap())
    });
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let p = presets::case4();
    let grid: Vec<f64> = (0..32).map(|i| -0.1 + 0.2 * i as f64 / 31.0).collect();
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("case4_32x32", |b| {
        b.iter(|| bifurcation::sweep_diagram(&p, black_box(&grid), &grid, &SweepOptions::default()))
    });
    g.finish();
}

criterion_group!(benches, certification, curves, sweep);
criterion_main!(benches);
