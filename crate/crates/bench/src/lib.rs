//! Inputs shared by the benchmarks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectify_core::{AtomicMeasure, Ball};

/// `count` atoms near the unit circle with uniform radial noise.
pub fn circle(count: usize, noise: f64, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            let r = 1.0 + noise * rng.gen_range(-1.0..1.0);
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    AtomicMeasure::from_weighted_points(&pts, &vec![2.0 * PI / count as f64; count]).unwrap()
}

/// Uniform atoms in `[-1, 1]^n` with unit weights.
pub fn cube(n: usize, count: usize, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    AtomicMeasure::from_points(&pts).unwrap()
}

/// Disjoint balls at the vertices of a Koch curve from `(-0.9, 0)` to `(0.9, 0)`.
pub fn koch_balls(levels: usize) -> Vec<Ball> {
    let mut pts = vec![[-0.9, 0.0], [0.9, 0.0]];
    let (s, c) = (PI / 3.0).sin_cos();
    for _ in 0..levels {
        let mut next = vec![pts[0]];
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            let p2 = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend([p1, p2, p3, b]);
        }
        pts = next;
    }
    let radius = 0.45 * 1.8 / 3f64.powi(levels as i32);
    pts.iter().map(|p| Ball::new(p.to_vec(), radius).unwrap()).collect()
}
