use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hetcycle::maps::{self, SectionPoint};
use hetcycle::model::presets;

fn return_map(c: &mut Criterion) {
    let p = presets::case5_horseshoe();
    let n0 = hetcycle::geometry::first_strip_index(&p);
    let z = maps::z_from_a(&p, 0.01, 0.0, n0);
    let q = SectionPoint::p_in(0.01, z);
    c.bench_function("return_map", |b| b.iter(|| maps::return_map(&p, black_box(&q), 0.0, 0.0)));
    c.bench_function("jacobian_on_branch", |b| {
        b.iter(|| maps::jacobian_on_branch(&p, black_box(0.01), black_box(z), n0, 0.0))
    });
    c.bench_function("pi_p_roundtrip", |b| {
        b.iter(|| {
            let out = maps::pi_p(&p, black_box(&q)).point().unwrap();
            maps::pi_p_inverse(&p, &out).unwrap()
        })
    });
}

criterion_group!(benches, return_map);
criterion_main!(benches);
