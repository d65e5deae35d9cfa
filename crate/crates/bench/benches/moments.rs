use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rectify_bench::{circle, cube};
use rectify_core::moments::{self, DisplacementConfig};
use rectify_core::Ball;

fn plane_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("best_affine_plane");
    for n in [2, 5, 8] {
        let mu = cube(n, 50, 1);
        let ball = Ball::new(vec![0.0; n], 2.0 * (n as f64).sqrt()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| moments::best_affine_plane(black_box(&mu), &ball, 1).unwrap())
        });
    }
    group.finish();
}

fn profiles(c: &mut Criterion) {
    let mu = circle(2000, 1e-3, 1);
    let cfg = DisplacementConfig::new(1);
    c.bench_function("dyadic_profile/circle_2000", |b| {
        b.iter(|| moments::dyadic_profile(&mu, black_box(&[1.0, 0.0]), 1, 0, 8, &cfg).unwrap())
    });
    c.bench_function("summability/circle_2000", |b| {
        b.iter(|| moments::summability_check(&mu, &Ball::new(vec![1.0, 0.0], 0.5).unwrap(), 1, &cfg))
    });
}

fn neighbors(c: &mut Criterion) {
    let mu = cube(3, 20_000, 2);
    let ball = Ball::new(vec![0.1, -0.2, 0.3], 0.1).unwrap();
    c.bench_function("indices_in/cube_20000", |b| b.iter(|| mu.indices_in(black_box(&ball))));
}

criterion_group!(benches, plane_fit, profiles, neighbors);
criterion_main!(benches);
