//! Iterative parametrization by interpolated affine projections.
//!
//! Starting from best-fit planes at a root scale, each step `i` fits planes on
//! a separated net of balls of radius `r_i = r_0 rho^i` and moves the current
//! sample of `T_{i-1}` by
//! `sigma_i(x) = x + sum_s lambda_s(x) pi_{V_s^perp}(p_s - x)`.
//! The composition `phi_i = sigma_i o ... o sigma_1` is tracked on a grid of
//! chart samples so distortion, graph norms and k-area can be read off.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{grassmann_distance, plane_distance, project, AffinePlane, Ball};
use crate::linalg::{self, axpy, dist, dist2, dot, norm, sub, unit_ball_volume};
use crate::measure::AtomicMeasure;
use crate::moments::{self, DisplacementConfig};
use crate::spatial::{greedy_net, SpatialIndex};

/// Cubic Hermite taper: 1 on `[0, 2]`, 0 on `[3, inf)`, C^1 in between.
pub fn bump(t: f64) -> f64 {
    if t <= 2.0 {
        1.0
    } else if t >= 3.0 {
        0.0
    } else {
        let s = t - 2.0;
        (1.0 - s) * (1.0 - s) * (1.0 + 2.0 * s)
    }
}

pub fn bump_derivative(t: f64) -> f64 {
    if t <= 2.0 || t >= 3.0 {
        0.0
    } else {
        let s = t - 2.0;
        -6.0 * s * (1.0 - s)
    }
}

/// Bumps `chi(|x - x_i| / r)` normalized by `max(sum, 1)`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    dim: usize,
    centers: Vec<Vec<f64>>,
    scale: f64,
    index: SpatialIndex,
}

impl PartitionOfUnity {
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn near(&self, x: &[f64]) -> Vec<usize> {
        if self.centers.is_empty() {
            return Vec::new();
        }
        self.index.query(x, 3.0 * self.scale)
    }

    /// Nonzero weights `(i, lambda_i(x))`.
    pub fn weights(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let raw: Vec<(usize, f64)> = self
            .near(x)
            .into_iter()
            .map(|i| (i, bump(dist(x, &self.centers[i]) / self.scale)))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        let norm = total.max(1.0);
        raw.into_iter().map(|(i, w)| (i, w / norm)).collect()
    }

    /// `psi(x) = 1 - sum_i lambda_i(x)`.
    pub fn leftover(&self, x: &[f64]) -> f64 {
        1.0 - self.weights(x).iter().map(|(_, w)| w).sum::<f64>()
    }

    /// Weights together with their gradients.
    pub fn weights_and_gradients(&self, x: &[f64]) -> Vec<(usize, f64, Vec<f64>)> {
        let n = self.dim;
        let raw: Vec<(usize, f64, Vec<f64>)> = self
            .near(x)
            .into_iter()
            .filter_map(|i| {
                let d = sub(x, &self.centers[i]);
                let len = norm(&d);
                let t = len / self.scale;
                let w = bump(t);
                if w <= 0.0 {
                    return None;
                }
                let g = if len > 0.0 {
                    linalg::scale(&d, bump_derivative(t) / (self.scale * len))
                } else {
                    vec![0.0; n]
                };
                Some((i, w, g))
            })
            .collect();
        let total: f64 = raw.iter().map(|(_, w, _)| w).sum();
        if total <= 1.0 {
            return raw;
        }
        let mut grad_total = vec![0.0; n];
        for (_, _, g) in &raw {
            axpy(&mut grad_total, 1.0, g);
        }
        raw.into_iter()
            .map(|(i, w, g)| {
                let mut gi = linalg::scale(&g, 1.0 / total);
                axpy(&mut gi, -w / (total * total), &grad_total);
                (i, w / total, gi)
            })
            .collect()
    }
}

/// Partition of unity over `r`-separated centers.
pub fn build_partition(centers: &[Vec<f64>], r: f64) -> Result<PartitionOfUnity> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("partition scale must be positive, got {r}")));
    }
    let dim = centers.first().map(Vec::len).unwrap_or(1);
    if let Some(c) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: c.len(),
        });
    }
    let flat: Vec<f64> = centers.iter().flatten().copied().collect();
    let index = SpatialIndex::new(&flat, dim);
    for (i, c) in centers.iter().enumerate() {
        for j in index.query(c, r) {
            if j > i {
                let d = dist(c, &centers[j]);
                if d < r {
                    return Err(Error::SeparationViolated {
                        first: i,
                        second: j,
                        distance: d,
                        scale: r,
                    });
                }
            }
        }
    }
    Ok(PartitionOfUnity {
        dim,
        centers: centers.to_vec(),
        scale: r,
        index,
    })
}

/// One interpolation step: partition plus a plane `p_i + V_i` per center.
#[derive(Debug, Clone)]
pub struct SigmaMap {
    partition: PartitionOfUnity,
    planes: Vec<AffinePlane>,
}

impl SigmaMap {
    /// `planes[i]` is `p_i + V_i` for center `i`.
    pub fn new(partition: PartitionOfUnity, planes: Vec<AffinePlane>) -> Result<Self> {
        if planes.len() != partition.len() {
            return Err(Error::InvalidArgument(format!(
                "{} planes for {} centers",
                planes.len(),
                partition.len()
            )));
        }
        Ok(Self { partition, planes })
    }

    pub fn partition(&self) -> &PartitionOfUnity {
        &self.partition
    }

    pub fn planes(&self) -> &[AffinePlane] {
        &self.planes
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (i, w) in self.partition.weights(x) {
            let plane = &self.planes[i];
            let normal = plane.normal_part(&sub(plane.base(), x));
            axpy(&mut y, w, &normal);
        }
        y
    }

    /// Row-major Jacobian `I + sum_i pi_i^perp(p_i - x) grad(lambda_i)^T - sum_i lambda_i pi_i^perp`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut j = linalg::identity(n);
        for (i, w, g) in self.partition.weights_and_gradients(x) {
            let plane = &self.planes[i];
            let normal = plane.normal_part(&sub(plane.base(), x));
            let proj = plane.projector();
            for a in 0..n {
                for b in 0..n {
                    let perp = if a == b { 1.0 } else { 0.0 } - proj[a * n + b];
                    j[a * n + b] += normal[a] * g[b] - w * perp;
                }
            }
        }
        j
    }
}

pub fn sigma_apply(map: &SigmaMap, x: &[f64]) -> Vec<f64> {
    map.apply(x)
}

/// Controls for [`reconstruct`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructParams {
    /// Upper bound on the number of refinement steps.
    pub max_scale_count: usize,
    /// Root scale `r_0`; chosen from the data when `None`.
    pub root_scale: Option<f64>,
    /// Steps stop before `r_i` falls below this; derived from atom spacing when `None`.
    pub min_scale: Option<f64>,
    /// Chart grid spacing; `r_I / 4` when `None`.
    pub sample_spacing: Option<f64>,
    /// Stop before a step whose good balls have mean displacement above `delta^2`.
    pub stop_when_rough: bool,
}

impl ReconstructParams {
    pub fn new(max_scale_count: usize) -> Self {
        Self {
            max_scale_count,
            root_scale: None,
            min_scale: None,
            sample_spacing: None,
            stop_when_rough: true,
        }
    }

    /// Runs every planned step regardless of flatness.
    pub fn fixed_depth(mut self) -> Self {
        self.stop_when_rough = false;
        self
    }

    pub fn with_root_scale(mut self, r: f64) -> Self {
        self.root_scale = Some(r);
        self
    }

    pub fn with_min_scale(mut self, r: f64) -> Self {
        self.min_scale = Some(r);
        self
    }

    pub fn with_sample_spacing(mut self, h: f64) -> Self {
        self.sample_spacing = Some(h);
        self
    }
}

/// A flat root chart: a grid on `plane` clipped to the Voronoi cell of its root.
#[derive(Debug, Clone, Serialize)]
pub struct Chart {
    pub root_center: Vec<f64>,
    pub plane: AffinePlane,
    pub radius: f64,
    pub spacing: f64,
    pub half_extent: usize,
    pub offset: usize,
    /// Half-spaces `a . u <= b` in chart coordinates.
    #[serde(skip)]
    constraints: Vec<(Vec<f64>, f64)>,
}

impl Chart {
    fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn sample_count(&self) -> usize {
        self.side().pow(self.plane.dim() as u32)
    }

    fn grid_coords(&self, local: usize) -> Vec<i64> {
        let side = self.side();
        let m = self.half_extent as i64;
        let mut rest = local;
        (0..self.plane.dim())
            .map(|_| {
                let c = (rest % side) as i64 - m;
                rest /= side;
                c
            })
            .collect()
    }

    fn local_index(&self, g: &[i64]) -> Option<usize> {
        let side = self.side() as i64;
        let m = self.half_extent as i64;
        let mut idx = 0i64;
        let mut stride = 1i64;
        for &c in g {
            if c < -m || c > m {
                return None;
            }
            idx += (c + m) * stride;
            stride *= side;
        }
        Some(idx as usize)
    }

    pub fn parameter(&self, local: usize) -> Vec<f64> {
        self.grid_coords(local)
            .iter()
            .map(|&c| c as f64 * self.spacing)
            .collect()
    }

    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        self.plane.embed(u)
    }

    fn satisfies(&self, u: &[f64], slack: f64) -> bool {
        self.constraints.iter().all(|(a, b)| dot(a, u) <= b + slack)
    }

    fn in_disk(&self, u: &[f64]) -> bool {
        dot(u, u) <= self.radius * self.radius
    }
}

/// Per-ball record of one scale.
#[derive(Debug, Clone, Serialize)]
pub struct BallRecord {
    pub center: Vec<f64>,
    pub radius: f64,
    pub mass: f64,
}

/// Local graph representation of `T_i` near a good ball.
#[derive(Debug, Clone, Serialize)]
pub struct Patch {
    pub center: Vec<f64>,
    pub radius: f64,
    pub plane: AffinePlane,
    pub displacement: f64,
    /// `sup |g| / r_i`.
    pub graph_sup: f64,
    /// Largest difference quotient of `g` over sampled grid edges.
    pub graph_lip: f64,
    /// Largest edge stretch of `sigma_i` inside the patch.
    pub distortion: f64,
    pub samples: usize,
}

impl Patch {
    pub fn graph_norm(&self) -> f64 {
        self.graph_sup + self.graph_lip
    }
}

/// Everything recorded at one refinement step.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleStep {
    pub step: usize,
    pub scale: f64,
    pub good: Vec<BallRecord>,
    pub bad: Vec<BallRecord>,
    pub patches: Vec<Patch>,
    /// `max |sigma_i(y) - y| / r_i` over active samples of `T_{i-1}`.
    pub max_motion: f64,
    /// Largest stretch or compression of `sigma_i` over active grid edges.
    pub distortion: f64,
    /// Largest `d_G(V_child, V_parent)^2 / (D_child + D_parent)` seen.
    pub coherence_constant: f64,
    /// Largest `mass(E) (r_{i+1}/5)^2 / (r_i^{k+2} D(y, 2 r_i))` over good balls.
    pub excess_constant: f64,
    pub excess_atoms: usize,
    #[serde(skip)]
    sigma: Option<SigmaMap>,
}

impl ScaleStep {
    pub fn sigma(&self) -> Option<&SigmaMap> {
        self.sigma.as_ref()
    }
}

/// Result of [`reconstruct`]: charts, the per-step maps and sample positions.
#[derive(Debug, Clone)]
pub struct ManifoldAtlas {
    pub k: usize,
    pub dim: usize,
    pub root_scale: f64,
    pub root_balls: Vec<BallRecord>,
    pub charts: Vec<Chart>,
    pub steps: Vec<ScaleStep>,
    pub hypothesis_ok: bool,
    pub summability_value: f64,
    pub covered_atoms: usize,
    pub remainder_atoms: usize,
    /// Largest distance to `T_I` from an atom within `2 r_I` of a final good center.
    pub max_atom_distance: f64,
    history: Vec<Vec<f64>>,
    owned: Vec<bool>,
    active: Vec<bool>,
    alive: Vec<bool>,
    chart_of: Vec<usize>,
}

impl ManifoldAtlas {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn final_scale(&self) -> f64 {
        self.steps.last().map(|s| s.scale).unwrap_or(self.root_scale)
    }

    pub fn sample_count(&self) -> usize {
        self.owned.len()
    }

    /// Positions of every chart sample on `T_i` (flat, `dim` per sample).
    pub fn positions(&self, i: usize) -> &[f64] {
        &self.history[i]
    }

    pub fn sample(&self, i: usize, s: usize) -> &[f64] {
        &self.history[i][s * self.dim..(s + 1) * self.dim]
    }

    /// Samples inside their own chart's Voronoi cell and root disk.
    pub fn owned_samples(&self) -> Vec<usize> {
        (0..self.owned.len()).filter(|&s| self.owned[s]).collect()
    }

    /// Samples still inside the good region after the last step.
    pub fn active_samples(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&s| self.active[s]).collect()
    }

    /// Samples of `T_I'` (not excised around bad balls).
    pub fn alive_samples(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&s| self.alive[s]).collect()
    }

    pub fn points(&self, i: usize, samples: &[usize]) -> Vec<Vec<f64>> {
        samples.iter().map(|&s| self.sample(i, s).to_vec()).collect()
    }

    /// `phi_i(x) = sigma_i o ... o sigma_1 (x)`.
    pub fn phi(&self, x: &[f64], i: usize) -> Vec<f64> {
        let mut y = x.to_vec();
        for step in &self.steps[..i] {
            if let Some(s) = &step.sigma {
                y = s.apply(&y);
            }
        }
        y
    }

    /// Axis-neighbor sample pairs inside a chart with both ends owned.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for chart in &self.charts {
            let k = chart.plane.dim();
            for local in 0..chart.sample_count() {
                let a = chart.offset + local;
                if !self.owned[a] {
                    continue;
                }
                let g = chart.grid_coords(local);
                for axis in 0..k {
                    let mut h = g.clone();
                    h[axis] += 1;
                    if let Some(l2) = chart.local_index(&h) {
                        let b = chart.offset + l2;
                        if self.owned[b] {
                            pairs.push((a, b));
                        }
                    }
                }
            }
        }
        pairs
    }

    /// Neighbor pairs with both ends active before step `i` (1-based).
    pub fn active_pairs(&self, i: usize) -> Vec<(usize, usize)> {
        let mask = self.active_mask(i.saturating_sub(1));
        self.neighbor_pairs()
            .into_iter()
            .filter(|&(a, b)| mask[a] && mask[b])
            .collect()
    }

    fn active_mask(&self, i: usize) -> Vec<bool> {
        let mut mask = self.owned.clone();
        for step in &self.steps[..i] {
            let step_idx = step.step;
            let r = step.scale;
            let centers: Vec<&Vec<f64>> = step.good.iter().map(|b| &b.center).collect();
            let flat: Vec<f64> = centers.iter().flat_map(|c| c.iter().copied()).collect();
            if centers.is_empty() {
                mask.iter_mut().for_each(|m| *m = false);
                continue;
            }
            let index = SpatialIndex::new(&flat, self.dim);
            let prev = &self.history[step_idx - 1];
            for (s, m) in mask.iter_mut().enumerate() {
                if *m {
                    let p = &prev[s * self.dim..(s + 1) * self.dim];
                    *m = !index.query(p, r).is_empty();
                }
            }
        }
        mask
    }

    /// Newton/Gauss–Newton inversion of `phi_I` on the chart of the nearest sample.
    ///
    /// Returns the preimage on `T_0` and the residual `|phi_I(u) - z|`.
    pub fn inverse(&self, z: &[f64]) -> Option<(Vec<f64>, f64)> {
        let last = self.steps.len();
        let owned = self.owned_samples();
        let (nearest, _) = owned
            .iter()
            .map(|&s| (s, dist2(self.sample(last, s), z)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
        let chart = &self.charts[self.chart_of[nearest]];
        let k = chart.plane.dim();
        let mut u = chart.parameter(nearest - chart.offset);
        let h = 1e-6 * self.root_scale;
        let mut residual = f64::INFINITY;
        for _ in 0..20 {
            let f = sub(&self.phi(&chart.point(&u), last), z);
            residual = norm(&f);
            let mut jac = vec![vec![0.0; self.dim]; k];
            for a in 0..k {
                let mut up = u.clone();
                let mut um = u.clone();
                up[a] += h;
                um[a] -= h;
                let fp = self.phi(&chart.point(&up), last);
                let fm = self.phi(&chart.point(&um), last);
                jac[a] = sub(&fp, &fm).iter().map(|v| v / (2.0 * h)).collect();
            }
            let mut normal = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for a in 0..k {
                for b in 0..k {
                    normal[a * k + b] = dot(&jac[a], &jac[b]);
                }
                rhs[a] = -dot(&jac[a], &f);
            }
            let step = linalg::solve(&normal, k, &rhs)?;
            axpy(&mut u, 1.0, &step);
            if norm(&step) <= 1e-10 * self.root_scale {
                residual = norm(&sub(&self.phi(&chart.point(&u), last), z));
                break;
            }
        }
        Some((chart.point(&u), residual))
    }
}

/// Largest `max(ratio, 1/ratio)` of `|sigma_i(y) - sigma_i(y')| / |y - y'|`
/// over pairs of samples on `T_{i-1}`; coincident pairs are skipped.
pub fn bilipschitz_distortion(atlas: &ManifoldAtlas, i: usize, pairs: &[(usize, usize)]) -> Result<f64> {
    if i == 0 || i > atlas.steps.len() {
        return Err(Error::InvalidArgument(format!(
            "step {i} outside 1..={}",
            atlas.steps.len()
        )));
    }
    Ok(pair_distortion(atlas, i - 1, i, pairs))
}

/// Distortion of `phi_to o phi_from^{-1}` over sample pairs.
pub fn composed_distortion(atlas: &ManifoldAtlas, from: usize, to: usize, pairs: &[(usize, usize)]) -> f64 {
    pair_distortion(atlas, from, to, pairs)
}

fn pair_distortion(atlas: &ManifoldAtlas, from: usize, to: usize, pairs: &[(usize, usize)]) -> f64 {
    let ratios: Vec<f64> = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let before = dist(atlas.sample(from, a), atlas.sample(from, b));
            if before == 0.0 {
                return None;
            }
            let after = dist(atlas.sample(to, a), atlas.sample(to, b));
            let q = after / before;
            Some(if q >= 1.0 { q } else { 1.0 / q })
        })
        .collect();
    ratios.into_iter().fold(1.0, f64::max)
}

fn default_min_scale(mu: &AtomicMeasure, k: usize) -> f64 {
    let s = mu.median_spacing();
    let count = 8.0 / unit_ball_volume(k);
    s * count.powf(1.0 / k as f64)
}

fn net_over_atoms(mu: &AtomicMeasure, r: f64) -> Vec<usize> {
    let all: Vec<usize> = (0..mu.len()).collect();
    greedy_net(|i| mu.position(i), &all, r)
}

fn choose_root_scale(mu: &AtomicMeasure, k: usize, cfg: &DisplacementConfig, min_scale: f64) -> f64 {
    let top = mu.bounds().radius;
    let mut r = 2f64.powi(top.log2().ceil() as i32);
    let mut best = (f64::INFINITY, r);
    while r >= 2.0 * min_scale {
        let worst = net_over_atoms(mu, r)
            .par_iter()
            .map(|&j| moments::displacement(mu, mu.position(j), r, k, cfg))
            .reduce(|| 0.0, f64::max);
        if worst <= cfg.delta * cfg.delta {
            return r;
        }
        if worst < best.0 {
            best = (worst, r);
        }
        r *= 0.5;
    }
    best.1
}

fn segment_ball_fraction(p: &[f64], q: &[f64], ball: &Ball) -> f64 {
    let d = sub(q, p);
    let f = sub(p, &ball.center);
    let a = dot(&d, &d);
    if a == 0.0 {
        return 0.0;
    }
    let b = 2.0 * dot(&f, &d);
    let c = dot(&f, &f) - ball.radius * ball.radius;
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-b - sq) / (2.0 * a)).max(0.0);
    let t1 = ((-b + sq) / (2.0 * a)).min(1.0);
    (t1 - t0).max(0.0)
}

/// Area of the disk of radius `r` about the origin inside triangle `(0, a, b)`, signed.
fn sector_triangle_area(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let aa = d[0] * d[0] + d[1] * d[1];
    let mut cuts = vec![0.0, 1.0];
    if aa > 0.0 {
        let bb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
        let cc = a[0] * a[0] + a[1] * a[1] - r * r;
        let disc = bb * bb - 4.0 * aa * cc;
        if disc > 0.0 {
            let sq = disc.sqrt();
            for t in [(-bb - sq) / (2.0 * aa), (-bb + sq) / (2.0 * aa)] {
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let p = at(w[0]);
        let q = at(w[1]);
        let m = at(0.5 * (w[0] + w[1]));
        let cross = p[0] * q[1] - p[1] * q[0];
        if m[0] * m[0] + m[1] * m[1] <= r * r {
            total += 0.5 * cross;
        } else {
            let dotpq = p[0] * q[0] + p[1] * q[1];
            total += 0.5 * r * r * cross.atan2(dotpq);
        }
    }
    total
}

/// Area of a planar convex polygon in R^n intersected with a ball.
fn polygon_ball_area(poly: &[Vec<f64>], ball: &Ball) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let e1 = sub(&poly[1], &poly[0]);
    let mut e2 = None;
    for v in &poly[2..] {
        let w = sub(v, &poly[0]);
        if let Ok(b) = linalg::orthonormalize(&[e1.clone(), w]) {
            e2 = Some(b);
            break;
        }
    }
    let Some(basis) = e2 else { return 0.0 };
    let plane = AffinePlane::from_orthonormal(poly[0].clone(), basis);
    let d = plane_distance(&ball.center, &plane);
    if d >= ball.radius {
        return 0.0;
    }
    let rho = (ball.radius * ball.radius - d * d).sqrt();
    let c = plane.coordinates(&ball.center);
    let pts: Vec<[f64; 2]> = poly
        .iter()
        .map(|v| {
            let u = plane.coordinates(v);
            [u[0] - c[0], u[1] - c[1]]
        })
        .collect();
    let mut total = 0.0;
    for i in 0..pts.len() {
        total += sector_triangle_area(pts[i], pts[(i + 1) % pts.len()], rho);
    }
    total.abs()
}

fn clip_polygon(poly: Vec<Vec<f64>>, a: &[f64], b: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let p = &poly[i];
        let q = &poly[(i + 1) % poly.len()];
        let fp = dot(a, p) - b;
        let fq = dot(a, q) - b;
        if fp <= 0.0 {
            out.push(p.clone());
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push(p.iter().zip(q).map(|(x, y)| x + t * (y - x)).collect());
        }
    }
    out
}

/// Simplices of the Kuhn triangulation of the chart grid, as local sample indices.
fn chart_simplices(chart: &Chart) -> Vec<Vec<usize>> {
    let k = chart.plane.dim();
    let m = chart.half_extent as i64;
    let perms = permutations(k);
    let cells = (2 * m) as usize;
    let mut out = Vec::new();
    let total = cells.pow(k as u32);
    for cell in 0..total {
        let mut rest = cell;
        let base: Vec<i64> = (0..k)
            .map(|_| {
                let c = (rest % cells) as i64 - m;
                rest /= cells;
                c
            })
            .collect();
        for perm in &perms {
            let mut v = base.clone();
            let mut simplex = vec![chart.local_index(&v).expect("grid vertex")];
            for &axis in perm {
                v[axis] += 1;
                simplex.push(chart.local_index(&v).expect("grid vertex"));
            }
            out.push(simplex);
        }
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// k-dimensional area of `T_I` inside the ball, summed over chart simplices
/// clipped to their Voronoi cells.
///
/// Segments and triangles are intersected with the ball exactly; higher
/// simplices are counted whole when their centroid lies inside.
pub fn measure_estimate(atlas: &ManifoldAtlas, ball: &Ball) -> Result<f64> {
    let reach = 2.0 * atlas.root_scale + ball.radius;
    if !atlas
        .root_balls
        .iter()
        .any(|b| dist(&b.center, &ball.center) < reach)
    {
        return Err(Error::OutsideRoot {
            center: ball.center.clone(),
            radius: ball.radius,
        });
    }
    let last = atlas.steps.len();
    let per_chart: Vec<f64> = atlas
        .charts
        .par_iter()
        .map(|chart| {
            let k = chart.plane.dim();
            let mut parts = Vec::new();
            for simplex in chart_simplices(chart) {
                let params: Vec<Vec<f64>> = simplex.iter().map(|&l| chart.parameter(l)).collect();
                let centroid: Vec<f64> = (0..k)
                    .map(|a| params.iter().map(|p| p[a]).sum::<f64>() / (k + 1) as f64)
                    .collect();
                if !chart.in_disk(&centroid) {
                    continue;
                }
                let mapped: Vec<&[f64]> = simplex
                    .iter()
                    .map(|&l| atlas.sample(last, chart.offset + l))
                    .collect();
                let near = mapped.iter().any(|p| dist(p, &ball.center) <= ball.radius + 2.0 * chart.spacing)
                    || dist(mapped[0], &ball.center) <= ball.radius + 4.0 * chart.spacing;
                if !near {
                    continue;
                }
                parts.push(simplex_in_ball(chart, &params, &mapped, ball));
            }
            linalg::tree_sum(&parts)
        })
        .collect();
    Ok(linalg::tree_sum(&per_chart))
}

fn simplex_in_ball(chart: &Chart, params: &[Vec<f64>], mapped: &[&[f64]], ball: &Ball) -> f64 {
    let k = params.len() - 1;
    match k {
        1 => {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            let u0 = params[0][0];
            let du = params[1][0] - u0;
            for (a, b) in &chart.constraints {
                let s = a[0] * du;
                let rhs = b - a[0] * u0;
                if s.abs() < 1e-300 {
                    if rhs < 0.0 {
                        return 0.0;
                    }
                } else if s > 0.0 {
                    hi = hi.min(rhs / s);
                } else {
                    lo = lo.max(rhs / s);
                }
            }
            if hi <= lo {
                return 0.0;
            }
            let lerp = |t: f64| -> Vec<f64> {
                mapped[0].iter().zip(mapped[1]).map(|(p, q)| p + t * (q - p)).collect()
            };
            let p = lerp(lo);
            let q = lerp(hi);
            segment_ball_fraction(&p, &q, ball) * dist(&p, &q)
        }
        2 => {
            let mut poly: Vec<Vec<f64>> = params.to_vec();
            for (a, b) in &chart.constraints {
                poly = clip_polygon(poly, a, *b);
                if poly.len() < 3 {
                    return 0.0;
                }
            }
            // Barycentric map from parameter space to the mapped triangle.
            let e1 = sub(&params[1], &params[0]);
            let e2 = sub(&params[2], &params[0]);
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            let image: Vec<Vec<f64>> = poly
                .iter()
                .map(|u| {
                    let w = sub(u, &params[0]);
                    let s = (w[0] * e2[1] - w[1] * e2[0]) / det;
                    let t = (e1[0] * w[1] - e1[1] * w[0]) / det;
                    mapped[0]
                        .iter()
                        .zip(mapped[1])
                        .zip(mapped[2])
                        .map(|((p0, p1), p2)| p0 + s * (p1 - p0) + t * (p2 - p0))
                        .collect()
                })
                .collect();
            polygon_ball_area(&image, ball)
        }
        _ => {
            let centroid: Vec<f64> = (0..k)
                .map(|a| params.iter().map(|p| p[a]).sum::<f64>() / (k + 1) as f64)
                .collect();
            let image_centroid: Vec<f64> = (0..mapped[0].len())
                .map(|a| mapped.iter().map(|p| p[a]).sum::<f64>() / (k + 1) as f64)
                .collect();
            if chart.satisfies(&centroid, 0.0) && ball.contains(&image_centroid) {
                linalg::simplex_volume(mapped)
            } else {
                0.0
            }
        }
    }
}

/// Runs the construction and records every step.
pub fn reconstruct(
    mu: &AtomicMeasure,
    k: usize,
    cfg: &DisplacementConfig,
    params: &ReconstructParams,
) -> Result<ManifoldAtlas> {
    cfg.validate()?;
    let n = mu.dim();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    if mu.is_empty() {
        return Err(Error::InvalidArgument("empty measure".into()));
    }
    let min_scale = params.min_scale.unwrap_or_else(|| default_min_scale(mu, k));
    let r0 = match params.root_scale {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(Error::InvalidArgument(format!("root scale must be positive, got {r}"))),
        None => choose_root_scale(mu, k, cfg, min_scale),
    };
    let mut steps_planned = 0;
    while steps_planned < params.max_scale_count && r0 * cfg.rho.powi(steps_planned as i32 + 1) >= min_scale {
        steps_planned += 1;
    }
    let r_final = r0 * cfg.rho.powi(steps_planned as i32);
    let h = params.sample_spacing.unwrap_or(r_final / 4.0);

    // Root balls and their planes.
    let root_centers: Vec<usize> = net_over_atoms(mu, r0)
        .into_iter()
        .filter(|&j| {
            let b = Ball {
                center: mu.position(j).to_vec(),
                radius: r0,
            };
            mu.mass_in(&b) >= cfg.gamma_good * r0.powi(k as i32)
        })
        .collect();
    if root_centers.is_empty() {
        let b = mu.bounds();
        return Err(Error::PlaneFitImpossible {
            center: b.center.clone(),
            radius: r0,
            mass: mu.total_mass(),
        });
    }
    let mut root_balls = Vec::new();
    let mut root_planes = Vec::new();
    for &j in &root_centers {
        let ball = Ball {
            center: mu.position(j).to_vec(),
            radius: r0,
        };
        let spectrum = moments::second_moment_spectrum(mu, &ball)?;
        root_planes.push(spectrum.plane(k));
        root_balls.push(BallRecord {
            center: ball.center.clone(),
            radius: r0,
            mass: spectrum.mass,
        });
    }

    let hypothesis = {
        let mut check_cfg = cfg.clone();
        check_cfg.finest_scale = Some(r_final);
        let atoms: Vec<usize> = (0..mu.len()).collect();
        let sums = moments::displacement_sums(mu, &atoms, moments::alpha_at_most(r0), k, &check_cfg);
        root_balls
            .iter()
            .map(|b| {
                let ball = Ball {
                    center: b.center.clone(),
                    radius: b.radius,
                };
                let terms: Vec<f64> = mu.indices_in(&ball).iter().map(|&j| mu.weight(j) * sums[j]).collect();
                linalg::tree_sum(&terms) / r0.powi(k as i32)
            })
            .fold(0.0, f64::max)
    };

    // Charts on the root planes, clipped to Voronoi cells of the root centers.
    let chart_radius = 2.0 * r0;
    let half_extent = (chart_radius / h).ceil() as usize;
    let mut charts = Vec::new();
    let mut offset = 0;
    for (s, (ball, plane)) in root_balls.iter().zip(&root_planes).enumerate() {
        let foot = project(&ball.center, plane);
        let chart_plane = plane.through(foot.clone());
        let ys = &ball.center;
        let mut constraints = Vec::new();
        for (t, other) in root_balls.iter().enumerate() {
            if t == s || dist(ys, &other.center) > 2.0 * chart_radius + 2.0 * r0 {
                continue;
            }
            let yt = &other.center;
            let d = sub(yt, ys);
            let a: Vec<f64> = chart_plane.directions().iter().map(|e| 2.0 * dot(e, &d)).collect();
            let b = dot(yt, yt) - dot(ys, ys) - 2.0 * dot(&foot, &d);
            constraints.push((a, b));
        }
        let chart = Chart {
            root_center: ys.clone(),
            plane: chart_plane,
            radius: chart_radius,
            spacing: h,
            half_extent,
            offset,
            constraints,
        };
        offset += chart.sample_count();
        charts.push(chart);
    }

    let total = offset;
    let mut positions = vec![0.0; total * n];
    let mut owned = vec![false; total];
    let mut chart_of = vec![0; total];
    for (c, chart) in charts.iter().enumerate() {
        let slack = 1e-9 * r0 * r0;
        for local in 0..chart.sample_count() {
            let s = chart.offset + local;
            let u = chart.parameter(local);
            let p = chart.point(&u);
            positions[s * n..(s + 1) * n].copy_from_slice(&p);
            owned[s] = chart.in_disk(&u) && chart.satisfies(&u, slack);
            chart_of[s] = c;
        }
    }

    let mut history = vec![positions.clone()];
    let mut active = owned.clone();
    let mut alive = owned.clone();
    let mut steps = Vec::new();
    let mut previous_good: Vec<(Vec<f64>, AffinePlane, f64)> = root_balls
        .iter()
        .zip(&root_planes)
        .map(|(b, p)| (b.center.clone(), p.clone(), moments::displacement(mu, &b.center, r0, k, cfg)))
        .collect();
    let mut previous_radius = r0;

    for step in 1..=steps_planned {
        let r = r0 * cfg.rho.powi(step as i32);
        let r_next = r * cfg.rho;
        let candidates: Vec<usize> = (0..total).filter(|&s| active[s]).collect();
        let centers = greedy_net(|s| &positions[s * n..(s + 1) * n], &candidates, r);

        struct Fit {
            center: Vec<f64>,
            mass: f64,
            plane: Option<AffinePlane>,
            displacement: f64,
            excess: usize,
            excess_constant: f64,
            coherence: f64,
        }
        let threshold = cfg.gamma_good * r.powi(k as i32);
        let prev_index = {
            let flat: Vec<f64> = previous_good.iter().flat_map(|g| g.0.iter().copied()).collect();
            SpatialIndex::new(&flat, n)
        };
        let fits: Vec<Fit> = centers
            .par_iter()
            .map(|&s| {
                let y = positions[s * n..(s + 1) * n].to_vec();
                let ball = Ball {
                    center: y.clone(),
                    radius: r,
                };
                let idx = mu.indices_in(&ball);
                let mass: f64 = idx.iter().map(|&j| mu.weight(j)).sum();
                if mass < threshold || mass <= 0.0 {
                    return Fit {
                        center: y,
                        mass,
                        plane: None,
                        displacement: 0.0,
                        excess: 0,
                        excess_constant: 0.0,
                        coherence: 0.0,
                    };
                }
                let spectrum = moments::spectrum_of(mu, &idx).expect("positive mass");
                let plane = spectrum.plane(k);
                let displacement = spectrum.tail_sum(k) / r.powi(k as i32 + 2);
                let excess_idx: Vec<usize> = idx
                    .iter()
                    .copied()
                    .filter(|&j| plane_distance(mu.position(j), &plane) > r_next / 4.0)
                    .collect();
                let excess_mass: f64 = excess_idx.iter().map(|&j| mu.weight(j)).sum();
                let d2 = moments::displacement(mu, &y, 2.0 * r, k, cfg);
                let excess_constant = if excess_mass > 0.0 {
                    excess_mass * (r_next / 5.0).powi(2) / (r.powi(k as i32 + 2) * d2)
                } else {
                    0.0
                };
                let parent = prev_index
                    .query(&y, previous_radius)
                    .into_iter()
                    .min_by(|&a, &b| {
                        dist2(&previous_good[a].0, &y)
                            .total_cmp(&dist2(&previous_good[b].0, &y))
                            .then(a.cmp(&b))
                    });
                let coherence = match parent {
                    Some(p) => {
                        let dg = grassmann_distance(&plane, &previous_good[p].1);
                        let denom = displacement + previous_good[p].2;
                        if denom > 0.0 {
                            dg * dg / denom
                        } else {
                            0.0
                        }
                    }
                    None => 0.0,
                };
                Fit {
                    center: y,
                    mass,
                    plane: Some(plane),
                    displacement,
                    excess: excess_idx.len(),
                    excess_constant,
                    coherence,
                }
            })
            .collect();

        let mut good = Vec::new();
        let mut bad = Vec::new();
        let mut good_centers = Vec::new();
        let mut good_planes = Vec::new();
        let mut good_disp = Vec::new();
        let mut excess_atoms = 0;
        let mut excess_constant: f64 = 0.0;
        let mut coherence_constant: f64 = 0.0;
        for f in &fits {
            let record = BallRecord {
                center: f.center.clone(),
                radius: r,
                mass: f.mass,
            };
            match &f.plane {
                Some(p) => {
                    good.push(record);
                    good_centers.push(f.center.clone());
                    good_planes.push(p.clone());
                    good_disp.push(f.displacement);
                    excess_atoms += f.excess;
                    excess_constant = excess_constant.max(f.excess_constant);
                    coherence_constant = coherence_constant.max(f.coherence);
                }
                None => bad.push(record),
            }
        }

        if params.stop_when_rough && !good_disp.is_empty() {
            let mean = linalg::tree_sum(&good_disp) / good_disp.len() as f64;
            if mean > cfg.delta * cfg.delta {
                break;
            }
        }

        let partition = build_partition(&good_centers, r)?;
        let sigma = SigmaMap::new(partition, good_planes.clone())?;
        let moved: Vec<f64> = positions
            .par_chunks(n)
            .flat_map_iter(|p| sigma.apply(p))
            .collect();

        let motions: Vec<f64> = (0..total)
            .into_par_iter()
            .filter(|&s| active[s])
            .map(|s| dist(&positions[s * n..(s + 1) * n], &moved[s * n..(s + 1) * n]) / r)
            .collect();
        let max_motion = motions.into_iter().fold(0.0, f64::max);

        let good_index = SpatialIndex::new(&good_centers.iter().flatten().copied().collect::<Vec<_>>(), n);
        let bad_centers: Vec<f64> = bad.iter().flat_map(|b| b.center.iter().copied()).collect();
        let bad_index = SpatialIndex::new(&bad_centers, n);
        let new_active: Vec<bool> = (0..total)
            .into_par_iter()
            .map(|s| {
                active[s] && !good_centers.is_empty() && !good_index.query(&positions[s * n..(s + 1) * n], r).is_empty()
            })
            .collect();
        let new_alive: Vec<bool> = (0..total)
            .into_par_iter()
            .map(|s| {
                if !alive[s] {
                    return false;
                }
                let p = &positions[s * n..(s + 1) * n];
                bad.is_empty() || bad_index.query(p, r / 6.0).iter().all(|&b| dist(&bad[b].center, p) >= r / 6.0)
            })
            .collect();

        let pairs_step: Vec<(usize, usize)> = {
            let mut v = Vec::new();
            for chart in &charts {
                for local in 0..chart.sample_count() {
                    let a = chart.offset + local;
                    if !active[a] {
                        continue;
                    }
                    let g = chart.grid_coords(local);
                    for axis in 0..k {
                        let mut gg = g.clone();
                        gg[axis] += 1;
                        if let Some(l2) = chart.local_index(&gg) {
                            let b = chart.offset + l2;
                            if active[b] {
                                v.push((a, b));
                            }
                        }
                    }
                }
            }
            v
        };
        let stretch = |a: usize, b: usize| -> Option<f64> {
            let before = dist(&positions[a * n..(a + 1) * n], &positions[b * n..(b + 1) * n]);
            if before == 0.0 {
                return None;
            }
            let after = dist(&moved[a * n..(a + 1) * n], &moved[b * n..(b + 1) * n]);
            let q = after / before;
            Some(if q >= 1.0 { q } else { 1.0 / q })
        };
        let distortion = pairs_step
            .par_iter()
            .filter_map(|&(a, b)| stretch(a, b))
            .reduce(|| 1.0, f64::max);

        // Graph patches on T_i around each good ball.
        let moved_index = {
            let flat: Vec<f64> = (0..total)
                .filter(|&s| new_active[s])
                .flat_map(|s| moved[s * n..(s + 1) * n].iter().copied())
                .collect();
            (SpatialIndex::new(&flat, n), (0..total).filter(|&s| new_active[s]).collect::<Vec<_>>())
        };
        let edge_lookup: std::collections::HashMap<usize, Vec<usize>> = {
            let mut m: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
            for &(a, b) in &pairs_step {
                m.entry(a).or_default().push(b);
            }
            m
        };
        let patches: Vec<Patch> = good_centers
            .par_iter()
            .zip(&good_planes)
            .zip(&good_disp)
            .map(|((c, plane), &disp)| {
                let center = sigma.apply(c);
                let radius = 1.5 * r;
                let members: Vec<usize> = moved_index
                    .0
                    .query(&center, radius)
                    .into_iter()
                    .map(|i| moved_index.1[i])
                    .collect();
                let member_set: std::collections::HashSet<usize> = members.iter().copied().collect();
                let mut sup: f64 = 0.0;
                let mut lip: f64 = 0.0;
                let mut local_distortion: f64 = 1.0;
                for &a in &members {
                    let pa = &moved[a * n..(a + 1) * n];
                    let ga = plane.normal_part(&sub(pa, plane.base()));
                    sup = sup.max(norm(&ga) / r);
                    if let Some(nbrs) = edge_lookup.get(&a) {
                        for &b in nbrs {
                            if !member_set.contains(&b) {
                                continue;
                            }
                            let pb = &moved[b * n..(b + 1) * n];
                            let gb = plane.normal_part(&sub(pb, plane.base()));
                            let du = norm(&plane.tangent_part(&sub(pb, pa)));
                            if du > 0.0 {
                                lip = lip.max(dist(&ga, &gb) / du);
                            }
                            if let Some(q) = stretch(a, b) {
                                local_distortion = local_distortion.max(q);
                            }
                        }
                    }
                }
                Patch {
                    center,
                    radius,
                    plane: plane.clone(),
                    displacement: disp,
                    graph_sup: sup,
                    graph_lip: lip,
                    distortion: local_distortion,
                    samples: members.len(),
                }
            })
            .collect();

        previous_good = good_centers
            .iter()
            .zip(&good_planes)
            .zip(&good_disp)
            .map(|((c, p), d)| (c.clone(), p.clone(), *d))
            .collect();
        previous_radius = r;
        active = new_active;
        alive = new_alive;
        positions = moved;
        history.push(positions.clone());
        steps.push(ScaleStep {
            step,
            scale: r,
            good,
            bad,
            patches,
            max_motion,
            distortion,
            coherence_constant,
            excess_constant,
            excess_atoms,
            sigma: Some(sigma),
        });
    }

    // Coverage of atoms by the final good balls and their distance to T_I.
    let (final_centers, final_radius) = match steps.last() {
        Some(s) => (s.good.iter().map(|b| b.center.clone()).collect::<Vec<_>>(), s.scale),
        None => (root_balls.iter().map(|b| b.center.clone()).collect(), r0),
    };
    let final_index = SpatialIndex::new(&final_centers.iter().flatten().copied().collect::<Vec<_>>(), n);
    let covered: Vec<usize> = (0..mu.len())
        .filter(|&j| !final_centers.is_empty() && !final_index.query(mu.position(j), 2.0 * final_radius).is_empty())
        .collect();
    let owned_final: Vec<f64> = (0..total)
        .filter(|&s| owned[s])
        .flat_map(|s| positions[s * n..(s + 1) * n].iter().copied())
        .collect();
    let surface = SpatialIndex::new(&owned_final, n);
    let max_atom_distance = covered
        .par_iter()
        .map(|&j| surface.nearest(mu.position(j)).map(|(_, d)| d).unwrap_or(f64::INFINITY))
        .reduce(|| 0.0, f64::max);

    Ok(ManifoldAtlas {
        k,
        dim: n,
        root_scale: r0,
        root_balls,
        charts,
        steps,
        hypothesis_ok: hypothesis < cfg.delta * cfg.delta,
        summability_value: hypothesis,
        covered_atoms: covered.len(),
        remainder_atoms: mu.len() - covered.len(),
        max_atom_distance,
        history,
        owned,
        active,
        alive,
        chart_of,
    })
}

/// Serializable summary of an atlas: per-scale patch records and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct AtlasReport {
    pub k: usize,
    pub dim: usize,
    pub root_scale: f64,
    pub final_scale: f64,
    pub hypothesis_ok: bool,
    pub summability_value: f64,
    pub covered_atoms: usize,
    pub remainder_atoms: usize,
    pub max_atom_distance: f64,
    pub total_distortion: f64,
    pub charts: usize,
    pub samples: usize,
    pub scales: Vec<ScaleReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleReport {
    pub step: usize,
    pub scale: f64,
    pub good_balls: usize,
    pub bad_balls: usize,
    pub max_motion: f64,
    pub distortion: f64,
    pub coherence_constant: f64,
    pub excess_constant: f64,
    pub excess_atoms: usize,
    pub patches: Vec<PatchReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub displacement: f64,
    pub graph_norm: f64,
    pub distortion: f64,
}

impl ManifoldAtlas {
    pub fn report(&self) -> AtlasReport {
        let pairs = self.neighbor_pairs();
        let total_distortion = composed_distortion(self, 0, self.steps.len(), &pairs);
        AtlasReport {
            k: self.k,
            dim: self.dim,
            root_scale: self.root_scale,
            final_scale: self.final_scale(),
            hypothesis_ok: self.hypothesis_ok,
            summability_value: self.summability_value,
            covered_atoms: self.covered_atoms,
            remainder_atoms: self.remainder_atoms,
            max_atom_distance: self.max_atom_distance,
            total_distortion,
            charts: self.charts.len(),
            samples: self.owned.iter().filter(|o| **o).count(),
            scales: self
                .steps
                .iter()
                .map(|s| ScaleReport {
                    step: s.step,
                    scale: s.scale,
                    good_balls: s.good.len(),
                    bad_balls: s.bad.len(),
                    max_motion: s.max_motion,
                    distortion: s.distortion,
                    coherence_constant: s.coherence_constant,
                    excess_constant: s.excess_constant,
                    excess_atoms: s.excess_atoms,
                    patches: s
                        .patches
                        .iter()
                        .map(|p| PatchReport {
                            center: p.center.clone(),
                            radius: p.radius,
                            base: p.plane.base().to_vec(),
                            basis: p.plane.directions().to_vec(),
                            displacement: p.displacement,
                            graph_norm: p.graph_norm(),
                            distortion: p.distortion,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(2.0), 1.0);
        assert_eq!(bump(3.0), 0.0);
        assert!((bump(2.5) - 0.5).abs() < 1e-15);
        let h = 1e-7;
        for t in [2.1, 2.5, 2.9] {
            let fd = (bump(t + h) - bump(t - h)) / (2.0 * h);
            assert!((fd - bump_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn single_center_partition() {
        let p = build_partition(&[vec![0.0, 0.0]], 1.0).unwrap();
        assert_eq!(p.weights(&[1.9, 0.0]), vec![(0, 1.0)]);
        assert!(p.weights(&[3.0, 0.0]).is_empty());
        assert_eq!(p.leftover(&[0.5, 0.5]), 0.0);
    }

    #[test]
    fn separation_violation_names_pair() {
        let err = build_partition(&[vec![0.0], vec![5.0], vec![5.5]], 1.0).unwrap_err();
        assert!(matches!(err, Error::SeparationViolated { first: 1, second: 2, .. }));
    }

    #[test]
    fn sigma_projects_when_planes_coincide() {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let partition = build_partition(&centers, 1.0).unwrap();
        let plane = AffinePlane::new(vec![0.0, 0.3], vec![vec![1.0, 0.0]]).unwrap();
        let sigma = SigmaMap::new(partition, vec![plane.clone(), plane.through(vec![1.0, 0.3])]).unwrap();
        let x = [0.4, -0.7];
        let y = sigma.apply(&x);
        assert!(dist(&y, &[0.4, 0.3]) < 1e-15);
        let far = [10.0, 1.0];
        assert_eq!(sigma.apply(&far), far.to_vec());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let centers = vec![vec![0.0, 0.0], vec![1.2, 0.1]];
        let partition = build_partition(&centers, 1.0).unwrap();
        let planes = vec![
            AffinePlane::new(vec![0.0, 0.05], vec![vec![1.0, 0.1]]).unwrap(),
            AffinePlane::new(vec![1.2, -0.02], vec![vec![1.0, -0.05]]).unwrap(),
        ];
        let sigma = SigmaMap::new(partition, planes).unwrap();
        let h = 1e-6;
        for x in [[0.3, 0.2], [2.6, 0.4], [3.5, -0.1], [-2.4, 0.3]] {
            let j = sigma.jacobian(&x);
            for b in 0..2 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[b] += h;
                xm[b] -= h;
                let fp = sigma.apply(&xp);
                let fm = sigma.apply(&xm);
                for a in 0..2 {
                    let fd = (fp[a] - fm[a]) / (2.0 * h);
                    assert!((fd - j[a * 2 + b]).abs() < 1e-6, "{x:?} {a}{b}: {fd} vs {}", j[a * 2 + b]);
                }
            }
        }
    }

    #[test]
    fn sector_area_full_and_empty() {
        // Unit square around origin, disk radius 10 covers it.
        let sq = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let mut a = 0.0;
        for i in 0..4 {
            a += sector_triangle_area(sq[i], sq[(i + 1) % 4], 10.0);
        }
        assert!((a - 4.0).abs() < 1e-14);
        let mut a = 0.0;
        for i in 0..4 {
            a += sector_triangle_area(sq[i], sq[(i + 1) % 4], 0.5);
        }
        assert!((a - std::f64::consts::PI * 0.25).abs() < 1e-14);
    }

    #[test]
    fn kuhn_triangulation_counts() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(1), vec![vec![0]]);
    }
}
