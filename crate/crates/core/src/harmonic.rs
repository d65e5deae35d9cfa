//! Closed-form maps with known singular sets: normalized energy, energy
//! drops, quantitative symmetry and the regularity scale.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, Ball};
use crate::linalg::{self, dist, dot, norm, sub, tree_sum, unit_ball_volume, unit_sphere_area};
use crate::measure::AtomicMeasure;
use crate::moments;

/// Where a catalog field fails to be smooth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Singularity {
    None,
    Point(Vec<f64>),
    /// The coordinate plane spanned by the first `dim` basis vectors.
    Plane { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum FieldKind {
    /// `x / |x|` into the unit sphere.
    RadialProjection,
    /// `w / |w|` for `w` the last `n - k` coordinates; invariant along the first `k`.
    KSymmetricExtension { k: usize },
    /// `(cos a.x, sin a.x)` into the unit circle.
    Smooth { frequency: Vec<f64> },
    /// `A x / |A x|` for invertible `A`; homogeneous but not stationary in general.
    HomogeneousCustom { matrix: Vec<f64> },
    /// `A x` into `R^m`.
    Linear { matrix: Vec<f64> },
    Constant { value: Vec<f64> },
}

/// An analytic map `f: R^n -> R^m` with closed-form gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyField {
    n: usize,
    m: usize,
    kind: FieldKind,
}

impl EnergyField {
    pub fn radial_projection(n: usize) -> Self {
        Self {
            n,
            m: n,
            kind: FieldKind::RadialProjection,
        }
    }

    pub fn k_symmetric_extension(n: usize, k: usize) -> Result<Self> {
        if k + 2 > n {
            return Err(Error::InvalidArgument(format!("extension needs k + 2 <= n, got k = {k}, n = {n}")));
        }
        Ok(Self {
            n,
            m: n - k,
            kind: FieldKind::KSymmetricExtension { k },
        })
    }

    pub fn smooth(frequency: Vec<f64>) -> Self {
        Self {
            n: frequency.len(),
            m: 2,
            kind: FieldKind::Smooth { frequency },
        }
    }

    /// `A` is row-major `n x n`.
    pub fn homogeneous_custom(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: matrix.len(),
            });
        }
        if linalg::determinant(&matrix, n).abs() < 1e-12 {
            return Err(Error::InvalidArgument("matrix must be invertible".into()));
        }
        Ok(Self {
            n,
            m: n,
            kind: FieldKind::HomogeneousCustom { matrix },
        })
    }

    /// `A` is row-major `m x n`.
    pub fn linear(m: usize, n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                got: matrix.len(),
            });
        }
        Ok(Self {
            n,
            m,
            kind: FieldKind::Linear { matrix },
        })
    }

    pub fn constant(n: usize, value: Vec<f64>) -> Self {
        Self {
            n,
            m: value.len(),
            kind: FieldKind::Constant { value },
        }
    }

    /// Catalog lookup by tag in `R^n`.
    pub fn from_tag(tag: &str, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("catalog fields need n >= 2, got {n}")));
        }
        match tag {
            "radial_projection" => Ok(Self::radial_projection(n)),
            "k_symmetric_extension" => Self::k_symmetric_extension(n, 1),
            "smooth" => Ok(Self::smooth((0..n).map(|i| 1.0 / (i + 1) as f64).collect())),
            "homogeneous_custom" => {
                let mut a = linalg::identity(n);
                for i in 0..n {
                    a[i * n + i] = 1.0 + i as f64 * 0.5;
                }
                a[1] = 0.5;
                Self::homogeneous_custom(n, a)
            }
            "linear" => {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    a[i * n + i] = 1.0;
                    a[i * n + (i + 1) % n] += 0.5;
                }
                Self::linear(n, n, a)
            }
            "constant" => {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                Ok(Self::constant(n, v))
            }
            other => Err(Error::InvalidArgument(format!("unknown fixture tag {other:?}"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            FieldKind::RadialProjection => "radial_projection",
            FieldKind::KSymmetricExtension { .. } => "k_symmetric_extension",
            FieldKind::Smooth { .. } => "smooth",
            FieldKind::HomogeneousCustom { .. } => "homogeneous_custom",
            FieldKind::Linear { .. } => "linear",
            FieldKind::Constant { .. } => "constant",
        }
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn domain_dim(&self) -> usize {
        self.n
    }

    pub fn target_dim(&self) -> usize {
        self.m
    }

    pub fn is_sphere_valued(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::RadialProjection
                | FieldKind::KSymmetricExtension { .. }
                | FieldKind::Smooth { .. }
                | FieldKind::HomogeneousCustom { .. }
        )
    }

    /// Stationary maps have monotone normalized energy.
    pub fn is_stationary(&self) -> bool {
        !matches!(self.kind, FieldKind::HomogeneousCustom { .. })
    }

    pub fn singular_set(&self) -> Singularity {
        match &self.kind {
            FieldKind::RadialProjection | FieldKind::HomogeneousCustom { .. } => Singularity::Point(vec![0.0; self.n]),
            FieldKind::KSymmetricExtension { k } => Singularity::Plane { dim: *k },
            _ => Singularity::None,
        }
    }

    /// Distance from `x` to the singular set (infinite for smooth fields).
    pub fn singular_distance(&self, x: &[f64]) -> f64 {
        match self.singular_set() {
            Singularity::None => f64::INFINITY,
            Singularity::Point(a) => dist(x, &a),
            Singularity::Plane { dim } => norm(&x[dim..]),
        }
    }

    /// Codimension of the singular set; `None` for smooth fields.
    fn singular_codim(&self) -> Option<usize> {
        match self.singular_set() {
            Singularity::None => None,
            Singularity::Point(_) => Some(self.n),
            Singularity::Plane { dim } => Some(self.n - dim),
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            FieldKind::RadialProjection => linalg::scale(x, 1.0 / norm(x)),
            FieldKind::KSymmetricExtension { k } => {
                let w = &x[*k..];
                linalg::scale(w, 1.0 / norm(w))
            }
            FieldKind::Smooth { frequency } => {
                let phase = dot(frequency, x);
                vec![phase.cos(), phase.sin()]
            }
            FieldKind::HomogeneousCustom { matrix } => {
                let z = linalg::mat_vec(matrix, self.n, x);
                linalg::scale(&z, 1.0 / norm(&z))
            }
            FieldKind::Linear { matrix } => (0..self.m)
                .map(|a| dot(&matrix[a * self.n..(a + 1) * self.n], x))
                .collect(),
            FieldKind::Constant { value } => value.clone(),
        }
    }

    /// Row-major `m x n` Jacobian.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = self.m;
        let mut g = vec![0.0; m * n];
        match &self.kind {
            FieldKind::RadialProjection => {
                let len = norm(x);
                for a in 0..n {
                    for b in 0..n {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        g[a * n + b] = (delta - x[a] * x[b] / (len * len)) / len;
                    }
                }
            }
            FieldKind::KSymmetricExtension { k } => {
                let w = &x[*k..];
                let len = norm(w);
                for a in 0..m {
                    for b in 0..m {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        g[a * n + k + b] = (delta - w[a] * w[b] / (len * len)) / len;
                    }
                }
            }
            FieldKind::Smooth { frequency } => {
                let phase = dot(frequency, x);
                for b in 0..n {
                    g[b] = -phase.sin() * frequency[b];
                    g[n + b] = phase.cos() * frequency[b];
                }
            }
            FieldKind::HomogeneousCustom { matrix } => {
                let z = linalg::mat_vec(matrix, n, x);
                let len = norm(&z);
                let f: Vec<f64> = z.iter().map(|v| v / len).collect();
                for a in 0..n {
                    for b in 0..n {
                        let mut s = matrix[a * n + b];
                        for c in 0..n {
                            s -= f[a] * f[c] * matrix[c * n + b];
                        }
                        g[a * n + b] = s / len;
                    }
                }
            }
            FieldKind::Linear { matrix } => g.copy_from_slice(matrix),
            FieldKind::Constant { .. } => {}
        }
        g
    }

    /// `|grad f(x)|^2` (Frobenius).
    pub fn energy_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::RadialProjection => (self.n - 1) as f64 / linalg::dot(x, x),
            FieldKind::KSymmetricExtension { k } => {
                let w = &x[*k..];
                (self.m - 1) as f64 / dot(w, w)
            }
            FieldKind::Smooth { frequency } => dot(frequency, frequency),
            FieldKind::Linear { matrix } => dot(matrix, matrix),
            FieldKind::Constant { .. } => 0.0,
            FieldKind::HomogeneousCustom { .. } => {
                let g = self.gradient(x);
                dot(&g, &g)
            }
        }
    }

    /// `|partial_v f(x)|^2` for a direction `v`.
    pub fn directional_energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let g = self.gradient(x);
        (0..self.m)
            .map(|a| {
                let d = dot(&g[a * self.n..(a + 1) * self.n], v);
                d * d
            })
            .sum()
    }

    /// Upper bound for `sup |grad f|` over the closed ball, exact except for
    /// the custom homogeneous field.
    pub fn grad_sup(&self, ball: &Ball) -> f64 {
        let clearance = self.singular_distance(&ball.center) - ball.radius;
        match &self.kind {
            FieldKind::RadialProjection | FieldKind::KSymmetricExtension { .. } => {
                if clearance <= 0.0 {
                    f64::INFINITY
                } else {
                    ((self.m - 1) as f64).sqrt() / clearance
                }
            }
            FieldKind::HomogeneousCustom { matrix } => {
                if clearance <= 0.0 {
                    return f64::INFINITY;
                }
                let n = self.n;
                let mut ata = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        ata[i * n + j] = (0..n).map(|c| matrix[c * n + i] * matrix[c * n + j]).sum();
                    }
                }
                let smallest = linalg::sym_eigen(&ata, n).values[n - 1].max(0.0).sqrt();
                norm(matrix) / (smallest * clearance)
            }
            FieldKind::Smooth { frequency } => norm(frequency),
            FieldKind::Linear { matrix } => norm(matrix),
            FieldKind::Constant { .. } => 0.0,
        }
    }

    fn integrable(&self) -> bool {
        self.singular_codim().map_or(true, |c| c >= 3)
    }
}

/// Controls for energy quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Accept when two successive node doublings differ by at most this, relatively.
    pub rel_tol: f64,
    /// Nodes per coordinate at the first level.
    pub initial_nodes: usize,
    /// Give up past this many nodes per coordinate.
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            initial_nodes: 8,
            max_nodes: 256,
        }
    }
}

impl QuadratureConfig {
    /// Same tolerance with twice the starting resolution.
    pub fn refined(&self) -> Self {
        Self {
            initial_nodes: self.initial_nodes * 2,
            max_nodes: self.max_nodes * 2,
            ..self.clone()
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=count {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if count == 1 { x } else { p1 };
            let prev = if count == 1 { 1.0 } else { p0 };
            dp = count as f64 * (x * p - prev) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn new(count: usize) -> Self {
        let (nodes, weights) = gauss_legendre(count);
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

/// Quadrature on the unit sphere `S^j` in `R^{j+1}`: points and weights.
fn sphere_rule(j: usize, count: usize) -> Vec<(Vec<f64>, f64)> {
    match j {
        0 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        1 => {
            let m = 2 * count;
            (0..m)
                .map(|i| {
                    let phi = 2.0 * PI * (i as f64 + 0.5) / m as f64;
                    (vec![phi.cos(), phi.sin()], 2.0 * PI / m as f64)
                })
                .collect()
        }
        _ => {
            let inner = sphere_rule(j - 1, count);
            let rule = Rule::new(count);
            let mut out = Vec::new();
            for (a, wa) in rule.on(0.0, PI) {
                let s = a.sin();
                let weight = wa * s.powi(j as i32 - 1);
                for (xi, wx) in &inner {
                    let mut p = Vec::with_capacity(j + 1);
                    p.push(a.cos());
                    p.extend(xi.iter().map(|v| s * v));
                    out.push((p, weight * wx));
                }
            }
            out
        }
    }
}

/// `int_{B_R(c)} F` in spherical coordinates about `anchor`.
///
/// The polar axis points from the anchor to the center so the radial range
/// depends on the polar angle alone. An anchor outside the ball restricts the
/// polar angle to the cone that sees the ball.
fn ball_integral<F: Fn(&[f64]) -> f64 + Sync>(center: &[f64], radius: f64, anchor: &[f64], count: usize, f: &F) -> f64 {
    let dim = center.len();
    let offset = sub(center, anchor);
    let d = norm(&offset);
    let axis = if d > 0.0 {
        linalg::scale(&offset, 1.0 / d)
    } else {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    };
    let complement = linalg::complement_basis(&[axis.clone()], dim);
    let xi_rule = sphere_rule(dim - 2, count);
    let xis: Vec<(Vec<f64>, f64)> = xi_rule
        .into_iter()
        .map(|(xi, w)| {
            let mut v = vec![0.0; dim];
            for (c, b) in xi.iter().zip(&complement) {
                linalg::axpy(&mut v, *c, b);
            }
            (v, w)
        })
        .collect();
    let rule = Rule::new(count);

    // (psi, weight including d psi, rho_lo, rho_hi)
    let mut polar: Vec<(f64, f64, f64, f64)> = Vec::new();
    let gap = (radius * radius - d * d).max(0.0).sqrt();
    if d <= radius && gap > 0.0 && gap < 0.5 * d {
        // Anchor close to the sphere: cos psi = ±(gap/d) sinh v resolves the
        // narrow transition of the radial limit around psi = pi/2.
        let top = (d / gap).asinh();
        for sign in [1.0, -1.0] {
            for (v, w) in rule.on(0.0, top) {
                let c = sign * gap / d * v.sinh();
                let s = (1.0 - c * c).max(0.0).sqrt();
                if s == 0.0 {
                    continue;
                }
                let psi = c.acos();
                let dpsi = gap / d * v.cosh() / s;
                let hi_r = (d * c + gap * v.cosh()).max(0.0);
                polar.push((psi, w * dpsi, 0.0, hi_r));
            }
        }
    } else if d <= radius {
        for (lo, hi) in [(0.0, 0.5 * PI), (0.5 * PI, PI)] {
            for (psi, w) in rule.on(lo, hi) {
                let s = psi.sin();
                let c = psi.cos();
                let disc = (radius * radius - d * d * s * s).max(0.0).sqrt();
                let hi_r = (d * c + disc).max(0.0);
                polar.push((psi, w, 0.0, hi_r));
            }
        }
    } else {
        let smax = radius / d;
        for (u, w) in rule.on(0.0, 0.5 * PI) {
            let s = smax * u.sin();
            let psi = s.asin();
            let c = psi.cos();
            let dpsi = smax * u.cos() / c;
            let half = radius * u.cos();
            polar.push((psi, w * dpsi, d * c - half, d * c + half));
        }
    }

    let parts: Vec<f64> = polar
        .par_iter()
        .map(|&(psi, wpsi, lo, hi)| {
            if hi <= lo {
                return 0.0;
            }
            let s = psi.sin();
            let c = psi.cos();
            let jac = s.powi(dim as i32 - 2);
            let mut acc = Vec::with_capacity(xis.len());
            let mut y = vec![0.0; dim];
            for (xi, wx) in &xis {
                let mut inner = 0.0;
                for (rho, wr) in rule.on(lo, hi) {
                    for a in 0..dim {
                        y[a] = anchor[a] + rho * (c * axis[a] + s * xi[a]);
                    }
                    inner += wr * f(&y) * rho.powi(dim as i32 - 1);
                }
                acc.push(wx * inner);
            }
            wpsi * jac * tree_sum(&acc)
        })
        .collect();
    tree_sum(&parts)
}

/// `int_{dB_R(c)} G` with the polar axis toward `toward`.
fn sphere_integral<G: Fn(&[f64], &[f64]) -> f64 + Sync>(center: &[f64], radius: f64, toward: &[f64], count: usize, g: &G) -> f64 {
    let dim = center.len();
    let offset = sub(toward, center);
    let d = norm(&offset);
    let axis = if d > 0.0 {
        linalg::scale(&offset, 1.0 / d)
    } else {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    };
    let complement = linalg::complement_basis(&[axis.clone()], dim);
    let xis: Vec<(Vec<f64>, f64)> = sphere_rule(dim - 2, count)
        .into_iter()
        .map(|(xi, w)| {
            let mut v = vec![0.0; dim];
            for (c, b) in xi.iter().zip(&complement) {
                linalg::axpy(&mut v, *c, b);
            }
            (v, w)
        })
        .collect();
    let rule = Rule::new(count);
    let b = (d - radius).abs() / (2.0 * (d * radius).sqrt());
    let polar: Vec<(f64, f64)> = if d > 0.0 && b > 0.0 && b < 0.25 {
        // Target close to the sphere: sin(psi/2) = b sinh v flattens the peak at psi = 0.
        rule.on(0.0, (1.0 / b).asinh())
            .filter_map(|(v, w)| {
                let half = (b * v.sinh()).min(1.0);
                let c = (1.0 - half * half).sqrt();
                (c > 0.0).then(|| (2.0 * half.asin(), w * 2.0 * b * v.cosh() / c))
            })
            .collect()
    } else {
        rule.on(0.0, PI).collect()
    };
    let parts: Vec<f64> = polar
        .par_iter()
        .map(|&(psi, w)| {
            let s = psi.sin();
            let c = psi.cos();
            let mut acc = Vec::with_capacity(xis.len());
            for (xi, wx) in &xis {
                let normal: Vec<f64> = (0..dim).map(|a| c * axis[a] + s * xi[a]).collect();
                let y: Vec<f64> = (0..dim).map(|a| center[a] + radius * normal[a]).collect();
                acc.push(wx * g(&y, &normal));
            }
            w * s.powi(dim as i32 - 2) * tree_sum(&acc)
        })
        .collect();
    radius.powi(dim as i32 - 1) * tree_sum(&parts)
}

fn max_nodes_for(dim: usize, q: &QuadratureConfig) -> usize {
    let budget = (4.0e6f64).powf(1.0 / dim as f64).floor() as usize;
    q.max_nodes.min(budget.max(q.initial_nodes))
}

/// Repeats `eval(count)` with doubled node counts until two levels agree.
fn richardson<E: Fn(usize) -> f64>(q: &QuadratureConfig, dim: usize, eval: E) -> Result<f64> {
    let cap = max_nodes_for(dim, q);
    let mut count = q.initial_nodes.max(2);
    let mut previous = eval(count);
    let mut change = f64::INFINITY;
    while count * 2 <= cap {
        count *= 2;
        let current = eval(count);
        let scale = current.abs().max(previous.abs());
        if scale == 0.0 {
            return Ok(current);
        }
        change = (current - previous).abs() / scale;
        if change <= q.rel_tol {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::QuadratureFailure {
        tolerance: q.rel_tol,
        change,
    })
}

/// `int_{B_r(x)} |grad f|^2`.
fn dirichlet_integral(field: &EnergyField, x: &[f64], r: f64, q: &QuadratureConfig) -> Result<f64> {
    let n = field.n;
    match field.singular_set() {
        Singularity::None => {
            let density = field.energy_density(x);
            if matches!(field.kind, FieldKind::Smooth { .. } | FieldKind::Linear { .. } | FieldKind::Constant { .. }) {
                return Ok(density * unit_ball_volume(n) * r.powi(n as i32));
            }
            richardson(q, n, |c| ball_integral(x, r, x, c, &|y| field.energy_density(y)))
        }
        Singularity::Point(a) => {
            let anchor = if dist(x, &a) <= 2.0 * r { a } else { x.to_vec() };
            richardson(q, n, |c| ball_integral(x, r, &anchor, c, &|y| field.energy_density(y)))
        }
        Singularity::Plane { dim: k } => {
            // Product decomposition: the density depends on the normal part w only.
            let m = n - k;
            let wx = x[k..].to_vec();
            let density_m = (m - 1) as f64;
            let dwx = norm(&wx);
            let origin = vec![0.0; m];
            let inner = |s: f64, c: usize| -> f64 {
                if s <= 0.0 {
                    return 0.0;
                }
                let anchor = if dwx <= 2.0 * s { origin.clone() } else { wx.clone() };
                ball_integral(&wx, s, &anchor, c, &|w| density_m / dot(w, w))
            };
            let shell = unit_sphere_area(k);
            // inner(s) is not smooth where B_s(wx) starts to meet the singular plane.
            let mut cuts = vec![0.0, 0.5 * PI];
            if dwx > 0.0 && dwx < r {
                cuts.insert(1, (dwx / r).acos());
            }
            richardson(q, n, |c| {
                let rule = Rule::new(c);
                let parts: Vec<f64> = cuts
                    .windows(2)
                    .flat_map(|seg| rule.on(seg[0], seg[1]).collect::<Vec<_>>())
                    .map(|(tau, w)| {
                        let s = r * tau.cos();
                        let t = r * tau.sin();
                        w * inner(s, c) * t.powi(k as i32 - 1) * r * tau.cos()
                    })
                    .collect();
                shell * tree_sum(&parts)
            })
        }
    }
}

/// Normalized Dirichlet energy `r^{2-n} int_{B_r(x)} |grad f|^2`.
pub fn theta(field: &EnergyField, x: &[f64], r: f64) -> Result<f64> {
    theta_with(field, x, r, &QuadratureConfig::default())
}

pub fn theta_with(field: &EnergyField, x: &[f64], r: f64, q: &QuadratureConfig) -> Result<f64> {
    if x.len() != field.n {
        return Err(Error::DimensionMismatch {
            expected: field.n,
            got: x.len(),
        });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if !field.integrable() && field.singular_distance(x) <= r {
        return Err(Error::EnergyInfinite);
    }
    Ok(r.powi(2 - field.n as i32) * dirichlet_integral(field, x, r, q)?)
}

/// `W_{s,r}(x) = theta_r(x) - theta_s(x)`.
pub fn energy_drop(field: &EnergyField, x: &[f64], s: f64, r: f64) -> Result<f64> {
    energy_drop_with(field, x, s, r, &QuadratureConfig::default())
}

pub fn energy_drop_with(field: &EnergyField, x: &[f64], s: f64, r: f64, q: &QuadratureConfig) -> Result<f64> {
    if s > r {
        return Err(Error::InvalidArgument(format!("need s <= r, got s = {s}, r = {r}")));
    }
    Ok(theta_with(field, x, r, q)? - theta_with(field, x, s, q)?)
}

/// `2 r^{2-n} int_{dB_r(x)} |partial_nu f|^2`, the derivative of `theta_r` for stationary maps.
pub fn radial_boundary_energy(field: &EnergyField, x: &[f64], r: f64, q: &QuadratureConfig) -> Result<f64> {
    let toward = match field.singular_set() {
        Singularity::Point(a) => a,
        Singularity::Plane { dim } => {
            let mut p = x.to_vec();
            p[dim..].iter_mut().for_each(|v| *v = 0.0);
            p
        }
        Singularity::None => x.to_vec(),
    };
    let integral = richardson(q, field.n, |c| {
        sphere_integral(x, r, &toward, c, &|y, nu| field.directional_energy(y, nu))
    })?;
    Ok(2.0 * r.powi(2 - field.n as i32) * integral)
}

/// `theta_r(x)` with the dyadic drops `W_alpha(x) = theta_{r_{alpha-3}} - theta_{r_alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyPoint {
    pub x: Vec<f64>,
    pub r: f64,
    pub theta: f64,
    pub drops: Vec<(i32, f64)>,
}

pub fn energy_point(field: &EnergyField, x: &[f64], r: f64, alphas: &[i32]) -> Result<EnergyPoint> {
    let q = QuadratureConfig::default();
    let theta_r = theta_with(field, x, r, &q)?;
    let drops = alphas
        .iter()
        .map(|&a| {
            let w = energy_drop_with(field, x, moments::dyadic_scale(a), moments::dyadic_scale(a - 3), &q)?;
            Ok((a, w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyPoint {
        x: x.to_vec(),
        r,
        theta: theta_r,
        drops,
    })
}

/// Controls for orbit-averaged symmetry competitors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryConfig {
    /// Midpoint cells per axis across the ball (rounded up to even).
    pub grid: usize,
    /// Dilation radii in the orbit average.
    pub dilations: usize,
    /// Translations per plane direction in the orbit average.
    pub translations: usize,
    /// Grassmannian samples per plane dimension.
    pub grassmann_samples: usize,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            dilations: 4,
            translations: 3,
            grassmann_samples: 1000,
        }
    }
}

/// Smallest `⨍_{B} |f - f~|^2` found over the candidate planes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryResult {
    pub value: f64,
    pub plane: AffinePlane,
    pub point: Vec<f64>,
}

fn midpoint_grid(ball: &Ball, cells: usize) -> Vec<Vec<f64>> {
    let n = ball.dim();
    let cells = cells + cells % 2;
    let h = 2.0 * ball.radius / cells as f64;
    let total = cells.pow(n as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut p = Vec::with_capacity(n);
            for a in 0..n {
                let i = idx % cells;
                idx /= cells;
                p.push(ball.center[a] - ball.radius + (i as f64 + 0.5) * h);
            }
            ball.contains(&p).then_some(p)
        })
        .collect()
}

fn normalize_into(field: &EnergyField, v: &mut [f64]) {
    if field.is_sphere_valued() {
        let len = norm(v);
        if len > 0.0 {
            v.iter_mut().for_each(|c| *c /= len);
        }
    }
}

/// Orbit average of `f` over `x + v + t omega`, the competitor that is
/// 0-homogeneous about `x` and invariant along `plane`'s directions.
fn competitor(field: &EnergyField, plane: &AffinePlane, radius: f64, y: &[f64], cfg: &SymmetryConfig) -> Option<Vec<f64>> {
    let x = plane.base();
    let rel = sub(y, x);
    let normal = plane.normal_part(&rel);
    let len = norm(&normal);
    let omega: Vec<f64> = if len > 0.0 { normal.iter().map(|v| v / len).collect() } else { normal };
    let k = plane.dim();
    let steps = cfg.translations.max(1);
    let offsets: Vec<f64> = if steps == 1 {
        vec![0.0]
    } else {
        (0..steps)
            .map(|i| radius * (-0.5 + i as f64 / (steps - 1) as f64))
            .collect()
    };
    let mut acc = vec![0.0; field.m];
    let mut count = 0usize;
    for lattice in 0..steps.pow(k as u32) {
        let mut base = x.to_vec();
        let mut rest = lattice;
        for dir in plane.directions() {
            linalg::axpy(&mut base, offsets[rest % steps], dir);
            rest /= steps;
        }
        for i in 0..cfg.dilations.max(1) {
            let t = radius * (i + 1) as f64 / cfg.dilations.max(1) as f64;
            let mut p = base.clone();
            linalg::axpy(&mut p, t, &omega);
            let v = field.value(&p);
            if v.iter().all(|c| c.is_finite()) {
                linalg::axpy(&mut acc, 1.0, &v);
                count += 1;
            }
        }
    }
    if count == 0 {
        return None;
    }
    acc.iter_mut().for_each(|c| *c /= count as f64);
    normalize_into(field, &mut acc);
    Some(acc)
}

fn plane_value(field: &EnergyField, ball: &Ball, plane: &AffinePlane, grid: &[Vec<f64>], cfg: &SymmetryConfig) -> f64 {
    let terms: Vec<f64> = grid
        .iter()
        .filter_map(|y| {
            let f = field.value(y);
            if !f.iter().all(|c| c.is_finite()) {
                return None;
            }
            let g = competitor(field, plane, ball.radius, y, cfg)?;
            Some(linalg::dist2(&f, &g))
        })
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    tree_sum(&terms) / terms.len() as f64
}

/// Best constant competitor: the (normalized) mean of `f`.
fn constant_value(field: &EnergyField, grid: &[Vec<f64>]) -> f64 {
    let values: Vec<Vec<f64>> = grid
        .iter()
        .map(|y| field.value(y))
        .filter(|v| v.iter().all(|c| c.is_finite()))
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    let mut mean = vec![0.0; field.m];
    for v in &values {
        linalg::axpy(&mut mean, 1.0 / values.len() as f64, v);
    }
    normalize_into(field, &mut mean);
    let terms: Vec<f64> = values.iter().map(|v| linalg::dist2(v, &mean)).collect();
    tree_sum(&terms) / terms.len() as f64
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn primes(count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2;
    while out.len() < count {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Deterministic low-discrepancy sample of linear k-planes in `R^n`
/// (Halton points pushed through Box–Muller, then orthonormalized).
pub fn grassmannian_samples(n: usize, k: usize, count: usize) -> Vec<AffinePlane> {
    if k == 0 || k >= n {
        return Vec::new();
    }
    let normals = n * k;
    let bases = primes(normals.div_ceil(2) * 2);
    let mut out = Vec::with_capacity(count);
    let mut i = 1;
    while out.len() < count && i < 100 * count + 100 {
        let mut z = Vec::with_capacity(bases.len());
        for pair in bases.chunks(2) {
            let u1 = 1.0 - radical_inverse(i, pair[0]);
            let u2 = radical_inverse(i, pair[1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            z.push(rad * (2.0 * PI * u2).cos());
            z.push(rad * (2.0 * PI * u2).sin());
        }
        let dirs: Vec<Vec<f64>> = (0..k).map(|j| z[j * n..(j + 1) * n].to_vec()).collect();
        if let Ok(plane) = AffinePlane::linear(n, dirs) {
            out.push(plane);
        }
        i += 1;
    }
    out
}

/// Candidate k-planes through the ball center: the least-varying directions
/// of `⨍ grad f^T grad f` followed by Grassmannian samples.
pub fn plane_candidates(field: &EnergyField, ball: &Ball, k: usize, samples: usize, cfg: &SymmetryConfig) -> Vec<AffinePlane> {
    let n = field.n;
    let x = ball.center.clone();
    if k == 0 {
        return vec![AffinePlane::point(x)];
    }
    if k >= n {
        return vec![AffinePlane::coordinate(n, n).through(x)];
    }
    let mut out = Vec::new();
    let grid = midpoint_grid(ball, cfg.grid);
    let mut gram = vec![0.0; n * n];
    let mut used = 0usize;
    for y in &grid {
        let g = field.gradient(y);
        if !g.iter().all(|v| v.is_finite()) {
            continue;
        }
        used += 1;
        for a in 0..n {
            for b in 0..n {
                gram[a * n + b] += (0..field.m).map(|c| g[c * n + a] * g[c * n + b]).sum::<f64>();
            }
        }
    }
    if used > 0 {
        let eig = linalg::sym_eigen(&gram, n);
        let dirs: Vec<Vec<f64>> = eig.vectors[n - k..].to_vec();
        if let Ok(p) = AffinePlane::new(x.clone(), dirs) {
            out.push(p);
        }
    }
    out.extend(grassmannian_samples(n, k, samples).into_iter().map(|p| p.through(x.clone())));
    out
}

/// Minimum over `candidates` of the orbit-competitor distance on the ball.
///
/// Homogeneity is about the ball center; candidate planes are re-based there.
pub fn symmetry_distance(field: &EnergyField, ball: &Ball, k: usize, candidates: &[AffinePlane]) -> Result<SymmetryResult> {
    symmetry_distance_with(field, ball, k, candidates, &SymmetryConfig::default())
}

pub fn symmetry_distance_with(
    field: &EnergyField,
    ball: &Ball,
    k: usize,
    candidates: &[AffinePlane],
    cfg: &SymmetryConfig,
) -> Result<SymmetryResult> {
    if ball.dim() != field.n {
        return Err(Error::DimensionMismatch {
            expected: field.n,
            got: ball.dim(),
        });
    }
    if let Some(p) = candidates.iter().find(|p| p.dim() != k) {
        return Err(Error::InvalidArgument(format!("candidate of dimension {} for k = {k}", p.dim())));
    }
    let default_candidates;
    let candidates = if candidates.is_empty() {
        default_candidates = plane_candidates(field, ball, k, cfg.grassmann_samples, cfg);
        &default_candidates[..]
    } else {
        candidates
    };
    let grid = midpoint_grid(ball, cfg.grid);
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|p| plane_value(field, ball, &p.through(ball.center.clone()), &grid, cfg))
        .collect();
    let (best, value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, v)| (i, *v))
        .ok_or(Error::EmptySet)?;
    Ok(SymmetryResult {
        value,
        plane: candidates[best].through(ball.center.clone()),
        point: ball.center.clone(),
    })
}

/// Controls for stratum sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumConfig {
    pub symmetry: SymmetryConfig,
    /// Grassmannian samples per plane dimension during sweeps.
    pub candidates: usize,
}

impl Default for StratumConfig {
    fn default() -> Self {
        Self {
            symmetry: SymmetryConfig {
                grid: 8,
                dilations: 3,
                translations: 3,
                grassmann_samples: 32,
            },
            candidates: 32,
        }
    }
}

/// How a ball was shown to be `(j, eps)`-symmetric for some `j >= k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Witness {
    GradientBound,
    Constant,
    Plane { dim: usize },
}

/// Searches for a `(j, eps)`-symmetric competitor with `j >= j_min`.
///
/// A witness is certain; its absence means only that no sampled competitor
/// came within `eps`.
pub fn symmetric_witness(field: &EnergyField, ball: &Ball, j_min: usize, eps: f64, cfg: &StratumConfig) -> Option<Witness> {
    let n = field.n;
    if j_min > n {
        return None;
    }
    let sup = field.grad_sup(ball);
    if (ball.radius * sup).powi(2) * (n as f64) / ((n + 2) as f64) < eps {
        return Some(Witness::GradientBound);
    }
    let grid = midpoint_grid(ball, cfg.symmetry.grid);
    if constant_value(field, &grid) < eps {
        return Some(Witness::Constant);
    }
    for j in (j_min..n).rev() {
        let candidates = plane_candidates(field, ball, j, cfg.candidates, &cfg.symmetry);
        for p in &candidates {
            if plane_value(field, ball, p, &grid, &cfg.symmetry) < eps {
                return Some(Witness::Plane { dim: j });
            }
        }
    }
    None
}

/// Grid sample of `S^k_{eps,r}` inside a ball.
#[derive(Debug, Clone)]
pub struct Stratum {
    pub k: usize,
    pub eps: f64,
    pub r: f64,
    pub grid_step: f64,
    pub domain: Ball,
    pub points: Vec<Vec<f64>>,
    /// Weighted by the grid cell k-content `grid_step^k`.
    pub measure: AtomicMeasure,
    pub grid_points: usize,
    /// Membership rests on sampled competitors and is therefore approximate.
    pub approximate: bool,
}

/// Dyadic scales `2^{-j} R` with `r <= s < R`, finest first.
pub fn stratum_scales(r: f64, outer: f64) -> Vec<f64> {
    let mut scales = Vec::new();
    let mut s = outer * 0.5;
    while s >= r * (1.0 - 1e-12) {
        scales.push(s);
        s *= 0.5;
    }
    scales.reverse();
    scales
}

/// `S^k_{eps,r} ∩ B_1(0)` on the grid `grid_step Z^n`.
pub fn quantitative_stratum(field: &EnergyField, k: usize, eps: f64, r: f64, grid_step: f64) -> Result<Stratum> {
    let domain = Ball::new(vec![0.0; field.n], 1.0)?;
    quantitative_stratum_in(field, &domain, k, eps, r, grid_step, &StratumConfig::default())
}

/// Grid points of `grid_step Z^n` in `domain` with no `(k+1, eps)`-symmetric
/// ball `B_s(x)` at any dyadic `r <= s < radius`.
pub fn quantitative_stratum_in(
    field: &EnergyField,
    domain: &Ball,
    k: usize,
    eps: f64,
    r: f64,
    grid_step: f64,
    cfg: &StratumConfig,
) -> Result<Stratum> {
    let n = field.n;
    if domain.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    if !(grid_step > 0.0) || !(r > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("grid step, r and eps must be positive".into()));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("need k < n, got k = {k}")));
    }
    let scales = stratum_scales(r, domain.radius);
    let lo: Vec<i64> = domain.center.iter().map(|c| ((c - domain.radius) / grid_step).ceil() as i64).collect();
    let hi: Vec<i64> = domain.center.iter().map(|c| ((c + domain.radius) / grid_step).floor() as i64).collect();
    let side: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1).max(0) as usize).collect();
    let total: usize = side.iter().product();
    let flags: Vec<Option<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut p = Vec::with_capacity(n);
            for a in 0..n {
                p.push((lo[a] + (idx % side[a]) as i64) as f64 * grid_step);
                idx /= side[a];
            }
            if !domain.contains(&p) {
                return None;
            }
            for &s in &scales {
                let ball = Ball {
                    center: p.clone(),
                    radius: s,
                };
                if symmetric_witness(field, &ball, k + 1, eps, cfg).is_some() {
                    return None;
                }
            }
            Some(p)
        })
        .collect();
    let grid_points = (0..total)
        .filter(|&idx| {
            let mut rest = idx;
            let p: Vec<f64> = (0..n)
                .map(|a| {
                    let v = (lo[a] + (rest % side[a]) as i64) as f64 * grid_step;
                    rest /= side[a];
                    v
                })
                .collect();
            domain.contains(&p)
        })
        .count();
    let points: Vec<Vec<f64>> = flags.into_iter().flatten().collect();
    let weight = grid_step.powi(k as i32);
    let measure = AtomicMeasure::new(n, points.iter().flatten().copied().collect(), vec![weight; points.len()])?;
    Ok(Stratum {
        k,
        eps,
        r,
        grid_step,
        domain: domain.clone(),
        points,
        measure,
        grid_points,
        approximate: true,
    })
}

/// `Vol(B_rho(points))` by counting cells of side `cell` whose centers lie within `rho` of a point.
pub fn tube_volume(points: &[Vec<f64>], rho: f64, cell: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points[0].len();
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let index = crate::spatial::SpatialIndex::new(&flat, n);
    let lo: Vec<i64> = (0..n)
        .map(|a| ((points.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min) - rho) / cell).floor() as i64)
        .collect();
    let hi: Vec<i64> = (0..n)
        .map(|a| ((points.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max) + rho) / cell).ceil() as i64)
        .collect();
    let side: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l) as usize).collect();
    let total: usize = side.iter().product();
    let inside = (0..total)
        .into_par_iter()
        .filter(|&idx| {
            let mut rest = idx;
            let c: Vec<f64> = (0..n)
                .map(|a| {
                    let v = (lo[a] as f64 + (rest % side[a]) as f64 + 0.5) * cell;
                    rest /= side[a];
                    v
                })
                .collect();
            index.nearest(&c).is_some_and(|(_, d)| d <= rho)
        })
        .count();
    inside as f64 * cell.powi(n as i32)
}

/// `Vol(B_r(S^k_{eps,r}))` for several `r`, each stratum on the grid `r Z^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinkowskiProfile {
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub samples: Vec<usize>,
    /// Fitted exponent of `volume ~ r^slope`.
    pub slope: f64,
}

pub fn minkowski_profile(field: &EnergyField, domain: &Ball, k: usize, eps: f64, radii: &[f64], cfg: &StratumConfig) -> Result<MinkowskiProfile> {
    let mut volumes = Vec::with_capacity(radii.len());
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = quantitative_stratum_in(field, domain, k, eps, r, r, cfg)?;
        volumes.push(tube_volume(&s.points, r, r / 8.0));
        samples.push(s.points.len());
    }
    let slope = if volumes.iter().all(|v| *v > 0.0) && radii.len() >= 2 {
        log_log_slope(radii, &volumes)
    } else {
        f64::NAN
    };
    Ok(MinkowskiProfile {
        radii: radii.to_vec(),
        volumes,
        samples,
        slope,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Largest `r <= 1` with `r sup_{B_r(x)} |grad f| <= 1`; 0 on the singular set.
pub fn regularity_scale(field: &EnergyField, x: &[f64]) -> f64 {
    let ok = |r: f64| {
        let sup = field.grad_sup(&Ball {
            center: x.to_vec(),
            radius: r,
        });
        r * sup <= 1.0
    };
    if field.singular_distance(x) == 0.0 {
        return 0.0;
    }
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `Vol({x in domain : r_f(x) < r})` by octree refinement using that `r_f`
/// is 1-Lipschitz.
pub fn regularity_sublevel_volume(field: &EnergyField, domain: &Ball, r: f64, max_depth: usize) -> f64 {
    let n = field.n;
    let half = domain.radius;
    fn visit(field: &EnergyField, domain: &Ball, r: f64, c: Vec<f64>, half: f64, depth: usize, max_depth: usize) -> f64 {
        let n = c.len();
        let diag = half * (n as f64).sqrt();
        let dc = dist(&c, &domain.center);
        if dc - diag >= domain.radius {
            return 0.0;
        }
        let volume = (2.0 * half).powi(n as i32);
        let rf = regularity_scale(field, &c);
        if rf - diag >= r {
            return 0.0;
        }
        let in_domain = dc + diag <= domain.radius;
        if in_domain && rf + diag < r {
            return volume;
        }
        if depth == max_depth {
            return if dc <= domain.radius && rf < r { volume } else { 0.0 };
        }
        let mut parts = Vec::with_capacity(1 << n);
        for corner in 0..(1usize << n) {
            let child: Vec<f64> = (0..n)
                .map(|a| c[a] + if corner >> a & 1 == 1 { 0.5 * half } else { -0.5 * half })
                .collect();
            parts.push(visit(field, domain, r, child, 0.5 * half, depth + 1, max_depth));
        }
        tree_sum(&parts)
    }
    let children: Vec<Vec<f64>> = (0..(1usize << n))
        .map(|corner| {
            (0..n)
                .map(|a| domain.center[a] + if corner >> a & 1 == 1 { 0.5 * half } else { -0.5 * half })
                .collect()
        })
        .collect();
    let parts: Vec<f64> = children
        .into_par_iter()
        .map(|c| visit(field, domain, r, c, 0.5 * half, 1, max_depth))
        .collect();
    tree_sum(&parts)
}

/// Both sides of the L^2 best-approximation inequality at `B_r(p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestApproximation {
    /// `D_mu(p, r)` with the fitted infimum.
    pub lhs: f64,
    /// `r^{-k} int_{B_r(p)} W_0 dmu` with `W_0 = theta_{8r} - theta_r`.
    pub rhs: f64,
    pub ratio: f64,
    /// `0`-symmetry distance of `B_{9r}(p)` about `p`.
    pub zero_symmetry: f64,
    /// Best sampled `(k+1)`-symmetry distance of `B_{9r}(p)`.
    pub higher_symmetry: f64,
    /// Whether `zero_symmetry < eps` and `higher_symmetry >= eps`.
    pub preconditions_hold: bool,
    pub atoms: usize,
    pub skipped: usize,
}

pub fn best_approx_check(
    field: &EnergyField,
    mu: &AtomicMeasure,
    p: &[f64],
    r: f64,
    k: usize,
    eps: f64,
    q: &QuadratureConfig,
) -> Result<BestApproximation> {
    let ball = Ball::new(p.to_vec(), r)?;
    let atoms = mu.indices_in(&ball);
    let lhs = moments::fitted_displacement(mu, p, r, k);
    let mut skipped = 0;
    let mut terms = Vec::with_capacity(atoms.len());
    for &j in &atoms {
        let x = mu.position(j);
        match energy_drop_with(field, x, r, 8.0 * r, q) {
            Ok(w) => terms.push(mu.weight(j) * w),
            Err(Error::EnergyInfinite) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let rhs = tree_sum(&terms) / r.powi(k as i32);
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let outer = Ball::new(p.to_vec(), 9.0 * r)?;
    let zero = symmetry_distance(field, &outer, 0, &[])?.value;
    let higher = if k + 1 <= field.n {
        symmetry_distance(field, &outer, k + 1, &[])?.value
    } else {
        f64::INFINITY
    };
    Ok(BestApproximation {
        lhs,
        rhs,
        ratio,
        zero_symmetry: zero,
        higher_symmetry: higher,
        preconditions_hold: zero < eps && higher >= eps,
        atoms: atoms.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for count in [1, 2, 5, 8, 17] {
            let (x, w) = gauss_legendre(count);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            let deg = 2 * count - 1;
            let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((integral - exact).abs() < 1e-13, "{count}");
        }
    }

    #[test]
    fn sphere_rule_areas() {
        for j in 0..4 {
            let area: f64 = sphere_rule(j, 12).iter().map(|(_, w)| w).sum();
            assert!((area - unit_sphere_area(j + 1)).abs() < 1e-10, "S^{j}: {area}");
        }
    }

    #[test]
    fn ball_volume_from_off_center_anchor() {
        let one = |_: &[f64]| 1.0;
        for anchor in [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [2.0, 0.5, 0.0], [1.0, 0.0, 0.0], [0.95, 0.0, 0.1]] {
            let v = ball_integral(&[0.0, 0.0, 0.0], 1.0, &anchor, 48, &one);
            assert!((v - 4.0 * PI / 3.0).abs() < 1e-6, "{anchor:?}: {v}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fields = [
            EnergyField::radial_projection(3),
            EnergyField::k_symmetric_extension(4, 1).unwrap(),
            EnergyField::from_tag("smooth", 3).unwrap(),
            EnergyField::from_tag("homogeneous_custom", 3).unwrap(),
            EnergyField::from_tag("linear", 3).unwrap(),
        ];
        let h = 1e-6;
        for f in &fields {
            let n = f.domain_dim();
            let x: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();
            let g = f.gradient(&x);
            assert!((dot(&g, &g) - f.energy_density(&x)).abs() < 1e-10 * dot(&g, &g).max(1.0));
            for b in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[b] += h;
                xm[b] -= h;
                let fp = f.value(&xp);
                let fm = f.value(&xm);
                for a in 0..f.target_dim() {
                    let fd = (fp[a] - fm[a]) / (2.0 * h);
                    let exact = g[a * n + b];
                    assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} {a}{b}", f.tag());
                }
            }
        }
    }

    #[test]
    fn halton_planes_are_distinct() {
        let planes = grassmannian_samples(3, 1, 50);
        assert_eq!(planes.len(), 50);
        for (i, p) in planes.iter().enumerate() {
            for q in &planes[i + 1..] {
                assert!(crate::geometry::grassmann_distance(p, q) > 1e-6);
            }
        }
    }
}
