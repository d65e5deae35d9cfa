//! Affine planes, balls, projections and subspace/set distances.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, sub};

/// Closed ball `{y : |y - center| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        linalg::dist2(point, &self.center) <= self.radius * self.radius
    }

    /// Same center, radius multiplied by `factor`.
    pub fn dilate(&self, factor: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }

    /// True when the open balls do not meet.
    pub fn disjoint_from(&self, other: &Ball) -> bool {
        linalg::dist(&self.center, &other.center) >= self.radius + other.radius
    }
}

/// A k-dimensional affine subspace `base + span(directions)`.
///
/// Directions are kept orthonormal; `k = 0` is a single point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePlane {
    base: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

impl AffinePlane {
    /// Orthonormalizes `directions` and rejects nearly dependent input.
    pub fn new(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.len();
        if let Some(d) = directions.iter().find(|d| d.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
        if directions.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} directions in R^{n}",
                directions.len()
            )));
        }
        let directions = linalg::orthonormalize(&directions)?;
        Ok(Self { base, directions })
    }

    /// Linear subspace through the origin.
    pub fn linear(n: usize, directions: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![0.0; n], directions)
    }

    pub fn point(base: Vec<f64>) -> Self {
        Self {
            base,
            directions: Vec::new(),
        }
    }

    /// The coordinate subspace spanned by the first `k` standard basis vectors.
    pub fn coordinate(n: usize, k: usize) -> Self {
        let directions = (0..k)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Self {
            base: vec![0.0; n],
            directions,
        }
    }

    pub(crate) fn from_orthonormal(base: Vec<f64>, directions: Vec<Vec<f64>>) -> Self {
        Self { base, directions }
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// The same directions through a new base point.
    pub fn through(&self, base: Vec<f64>) -> AffinePlane {
        Self {
            base,
            directions: self.directions.clone(),
        }
    }

    /// The parallel linear subspace.
    pub fn linear_part(&self) -> AffinePlane {
        self.through(vec![0.0; self.ambient_dim()])
    }

    /// Orthogonal complement of the linear part, through the same base.
    pub fn complement(&self) -> AffinePlane {
        let dirs = linalg::complement_basis(&self.directions, self.ambient_dim());
        Self {
            base: self.base.clone(),
            directions: dirs,
        }
    }

    /// Coordinates of `point - base` in the direction basis.
    pub fn coordinates(&self, point: &[f64]) -> Vec<f64> {
        let rel = sub(point, &self.base);
        self.directions.iter().map(|d| dot(&rel, d)).collect()
    }

    /// Point of the plane with the given coordinates.
    pub fn embed(&self, coords: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (c, d) in coords.iter().zip(&self.directions) {
            axpy(&mut p, *c, d);
        }
        p
    }

    /// Orthogonal projector onto the linear part, row-major `n x n`.
    pub fn projector(&self) -> Vec<f64> {
        let n = self.ambient_dim();
        let mut p = vec![0.0; n * n];
        for d in &self.directions {
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] += d[i] * d[j];
                }
            }
        }
        p
    }

    /// Component of a vector orthogonal to the linear part.
    pub fn normal_part(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        for d in &self.directions {
            let c = dot(v, d);
            axpy(&mut w, -c, d);
        }
        w
    }

    /// Component of a vector along the linear part.
    pub fn tangent_part(&self, v: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; v.len()];
        for d in &self.directions {
            axpy(&mut w, dot(v, d), d);
        }
        w
    }
}

/// Orthogonal projection `base + pi_V(point - base)` onto an affine plane.
pub fn project(point: &[f64], plane: &AffinePlane) -> Vec<f64> {
    let rel = sub(point, plane.base());
    let mut out = plane.base().to_vec();
    for d in plane.directions() {
        axpy(&mut out, dot(&rel, d), d);
    }
    out
}

/// Euclidean distance from a point to an affine plane.
pub fn plane_distance(point: &[f64], plane: &AffinePlane) -> f64 {
    linalg::norm(&plane.normal_part(&sub(point, plane.base())))
}

/// Grassmannian distance of the linear parts: the spectral norm of
/// `pi_V - pi_W`, or 1 when dimensions differ.
pub fn grassmann_distance(v: &AffinePlane, w: &AffinePlane) -> f64 {
    if v.dim() != w.dim() {
        return 1.0;
    }
    let n = v.ambient_dim();
    let pv = v.projector();
    let pw = w.projector();
    let diff: Vec<f64> = pv.iter().zip(&pw).map(|(a, b)| a - b).collect();
    linalg::sym_spectral_norm(&diff, n).clamp(0.0, 1.0)
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// `sup_{x in a} inf_{y in b} |x - y|`.
pub fn one_sided(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if b.len() >= 256 {
        let flat: Vec<f64> = b.iter().flatten().copied().collect();
        let index = crate::spatial::SpatialIndex::new(&flat, b[0].len());
        return a
            .par_iter()
            .map(|x| index.nearest(x).map(|(_, d)| d).unwrap_or(f64::INFINITY))
            .reduce(|| 0.0, f64::max);
    }
    a.par_iter()
        .map(|x| b.iter().map(|y| linalg::dist2(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}
