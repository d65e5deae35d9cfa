//! Built-in data sets selectable with `--fixture`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectify_core::{AtomicMeasure, Ball};

use crate::error::{CliError, CliResult};

pub const CLOUDS: &[&str] = &["plane", "circle", "snowflake"];
pub const FAMILIES: &[&str] = &["segment_family", "circle_family", "koch_family"];

/// A point cloud with its natural intrinsic dimension and, when known, a
/// dense sample of the underlying set.
#[derive(Debug, Clone)]
pub struct Cloud {
    pub measure: AtomicMeasure,
    pub k: usize,
    pub truth: Option<Vec<Vec<f64>>>,
}

/// `count` atoms of mass `2 pi / count` at angles `2 pi i / count`, with
/// uniform radial noise of amplitude `noise`.
pub fn circle(count: usize, noise: f64, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            let r = 1.0 + noise * rng.gen_range(-1.0..1.0);
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    AtomicMeasure::from_weighted_points(&pts, &vec![2.0 * PI / count as f64; count]).expect("finite circle")
}

pub fn unit_circle(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// Grid of spacing `h` on `[-1, 1]^2 x {0}` in `R^n`, cell-area weights.
pub fn plane(n: usize, h: f64) -> AtomicMeasure {
    let m = (1.0 / h).round() as i64;
    let mut pts = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let mut p = vec![0.0; n];
            p[0] = i as f64 * h;
            p[1] = j as f64 * h;
            pts.push(p);
        }
    }
    let w = vec![h * h; pts.len()];
    AtomicMeasure::from_weighted_points(&pts, &w).expect("finite plane")
}

/// Vertices of the Koch curve from `a` to `b` after `levels` subdivisions.
pub fn koch(a: [f64; 2], b: [f64; 2], levels: usize) -> Vec<[f64; 2]> {
    let mut pts = vec![a, b];
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
    pts
}

/// Koch curve vertices weighted by their share of the curve's length.
pub fn snowflake(levels: usize) -> AtomicMeasure {
    let pts = koch([-1.0, 0.0], [1.0, 0.0], levels);
    let seg = 2.0 / 3f64.powi(levels as i32);
    let pts: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
    let w = vec![seg; pts.len()];
    AtomicMeasure::from_weighted_points(&pts, &w).expect("finite curve")
}

pub fn cloud(name: &str, dim: Option<usize>, seed: u64) -> CliResult<Cloud> {
    match name {
        "plane" => Ok(Cloud {
            measure: plane(dim.unwrap_or(3).max(2), 0.05),
            k: 2,
            truth: None,
        }),
        "circle" => Ok(Cloud {
            measure: circle(2000, 1e-3, seed),
            k: 1,
            truth: Some(unit_circle(20_000)),
        }),
        "snowflake" => Ok(Cloud {
            measure: snowflake(6),
            k: 1,
            truth: None,
        }),
        _ => Err(CliError::Usage(format!(
            "unknown cloud fixture {name:?}; expected one of {CLOUDS:?}"
        ))),
    }
}

/// Four balls per dyadic generation along `[-1/2, 1/2] x {0}`, shrinking
/// toward the left end.
pub fn segment_family() -> Vec<Ball> {
    let mut balls = Vec::new();
    for j in 0..10 {
        let len = 2f64.powi(-j - 1);
        for i in 0..4 {
            let c = len + len / 8.0 * (2 * i + 1) as f64;
            balls.push(Ball {
                center: vec![c - 0.5, 0.0],
                radius: 0.99 * len / 8.0,
            });
        }
    }
    balls
}

/// `count` equal balls centered on (just inside) the unit circle.
pub fn circle_family(count: usize, radius: f64) -> Vec<Ball> {
    let big = 1.0 - 1e-9;
    (0..count)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / count as f64;
            Ball {
                center: vec![big * t.cos(), big * t.sin()],
                radius,
            }
        })
        .collect()
}

/// Disjoint balls at the vertices of a level-4 Koch curve.
pub fn koch_family() -> Vec<Ball> {
    let seg = 1.8 / 81.0;
    koch([-0.9, 0.0], [0.9, 0.0], 4)
        .iter()
        .map(|p| Ball {
            center: p.to_vec(),
            radius: 0.45 * seg,
        })
        .collect()
}

pub fn family(name: &str) -> CliResult<Vec<Ball>> {
    match name {
        "segment_family" => Ok(segment_family()),
        "circle_family" => Ok(circle_family(3141, 1e-3)),
        "koch_family" => Ok(koch_family()),
        _ => Err(CliError::Usage(format!(
            "unknown family fixture {name:?}; expected one of {FAMILIES:?}"
        ))),
    }
}
