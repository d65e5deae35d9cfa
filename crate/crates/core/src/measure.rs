//! Weighted atomic measures in R^n.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::linalg;
use crate::spatial::SpatialIndex;

/// `sum_j w_j delta_{x_j}` with an attached radius-query index.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    bounds: Ball,
    index: OnceLock<SpatialIndex>,
}

impl PartialEq for AtomicMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.positions == other.positions && self.weights == other.weights
    }
}

impl AtomicMeasure {
    /// Builds a measure from a flat coordinate array and weights.
    ///
    /// The bounding ball is centered at the coordinate-wise midpoint and is
    /// the smallest such ball containing every atom.
    pub fn new(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
        }
        if positions.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: positions.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {w} is not a finite nonnegative number")));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let bounds = bounding_ball(dim, &positions);
        Ok(Self {
            dim,
            positions,
            weights,
            bounds,
            index: OnceLock::new(),
        })
    }

    /// Unit-weight atoms at the given points.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        Self::from_weighted_points(points, &vec![1.0; points.len()])
    }

    pub fn from_weighted_points(points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(1);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim, points.iter().flatten().copied().collect(), weights.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.position(i).to_vec()).collect()
    }

    /// Smallest ball about the coordinate midpoint containing every atom.
    pub fn bounds(&self) -> &Ball {
        &self.bounds
    }

    pub fn total_mass(&self) -> f64 {
        linalg::tree_sum(&self.weights)
    }

    pub fn index(&self) -> &SpatialIndex {
        self.index
            .get_or_init(|| SpatialIndex::new(&self.positions, self.dim))
    }

    /// Atom indices inside the closed ball, ascending.
    pub fn indices_in(&self, ball: &Ball) -> Vec<usize> {
        self.index().query(&ball.center, ball.radius)
    }

    /// Atom indices inside the closed ball in index traversal order.
    pub fn indices_in_unordered(&self, ball: &Ball) -> Vec<usize> {
        self.index().query_unordered(&ball.center, ball.radius)
    }

    pub fn mass_in(&self, ball: &Ball) -> f64 {
        let w: Vec<f64> = self.indices_in_unordered(ball).iter().map(|&i| self.weights[i]).collect();
        linalg::tree_sum(&w)
    }

    /// The sub-measure on the given atoms (order preserved).
    pub fn restrict(&self, indices: &[usize]) -> AtomicMeasure {
        let positions = indices
            .iter()
            .flat_map(|&i| self.position(i).iter().copied())
            .collect();
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        AtomicMeasure::new(self.dim, positions, weights).expect("restriction of a valid measure")
    }

    /// Push-forward under `y -> (y - x) / r` with weights multiplied by `weight_factor`.
    pub fn rescaled(&self, x: &[f64], r: f64, weight_factor: f64) -> AtomicMeasure {
        let positions = (0..self.len())
            .flat_map(|i| {
                self.position(i)
                    .iter()
                    .zip(x)
                    .map(|(p, c)| (p - c) / r)
                    .collect::<Vec<_>>()
            })
            .collect();
        let weights = self.weights.iter().map(|w| w * weight_factor).collect();
        AtomicMeasure::new(self.dim, positions, weights).expect("rescaling of a valid measure")
    }

    /// Distance from each atom to the nearest atom at a different position
    /// (infinite for an isolated position).
    pub fn neighbor_gaps(&self) -> Vec<f64> {
        let index = self.index();
        let start = 1e-12_f64.max(self.bounds.radius * 1e-6);
        let limit = 4.0 * self.bounds.radius + 1.0;
        (0..self.len())
            .map(|i| {
                let p = self.position(i);
                let mut r = start;
                loop {
                    let d = index
                        .query(p, r)
                        .iter()
                        .map(|&j| linalg::dist(self.position(j), p))
                        .filter(|d| *d > 0.0)
                        .fold(f64::INFINITY, f64::min);
                    if d.is_finite() || r > limit {
                        return d;
                    }
                    r *= 4.0;
                }
            })
            .collect()
    }

    /// Median of the finite neighbor gaps, or 0 when there are none.
    pub fn median_spacing(&self) -> f64 {
        let mut gaps: Vec<f64> = self.neighbor_gaps().into_iter().filter(|g| g.is_finite()).collect();
        if gaps.is_empty() {
            return 0.0;
        }
        gaps.sort_by(f64::total_cmp);
        gaps[gaps.len() / 2]
    }
}

fn bounding_ball(dim: usize, positions: &[f64]) -> Ball {
    let count = positions.len() / dim;
    if count == 0 {
        return Ball {
            center: vec![0.0; dim],
            radius: 1.0,
        };
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in positions.chunks(dim) {
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let radius = positions
        .chunks(dim)
        .map(|p| linalg::dist(p, &center))
        .fold(0.0, f64::max);
    Ball {
        center,
        radius: if radius > 0.0 { radius } else { 1.0 },
    }
}
