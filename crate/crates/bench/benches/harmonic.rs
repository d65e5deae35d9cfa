use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rectify_core::harmonic::{self, EnergyField};
use rectify_core::Ball;

fn energy(c: &mut Criterion) {
    let radial = EnergyField::radial_projection(3);
    c.bench_function("theta/radial_origin", |b| {
        b.iter(|| harmonic::theta(&radial, black_box(&[0.0; 3]), 0.5).unwrap())
    });
    c.bench_function("theta/radial_off_center", |b| {
        b.iter(|| harmonic::theta(&radial, black_box(&[0.2, -0.1, 0.3]), 0.6).unwrap())
    });
    let extension = EnergyField::k_symmetric_extension(4, 1).unwrap();
    c.bench_function("theta/extension_r4", |b| {
        b.iter(|| harmonic::theta(&extension, black_box(&[0.1, 0.1, 0.05, 0.0]), 0.5).unwrap())
    });
}

fn strata(c: &mut Criterion) {
    let radial = EnergyField::radial_projection(3);
    let mut group = c.benchmark_group("strata");
    group.sample_size(10);
    group.bench_function("quantitative_stratum/radial_r16", |b| {
        b.iter(|| harmonic::quantitative_stratum(&radial, 0, 0.05, black_box(1.0 / 16.0), 1.0 / 16.0).unwrap())
    });
    let domain = Ball::new(vec![0.0; 3], 1.0).unwrap();
    group.bench_function("regularity_sublevel_volume/radial_r32", |b| {
        b.iter(|| harmonic::regularity_sublevel_volume(&radial, &domain, black_box(1.0 / 32.0), 9))
    });
    group.finish();
}

criterion_group!(benches, energy, strata);
criterion_main!(benches);
