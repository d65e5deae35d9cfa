//! Ball families: good/bad classification, excess sets, Vitali subcovers,
//! the separated decomposition, the discrete packing verifier and the
//! energy-driven inductive cover.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{plane_distance, AffinePlane, Ball};
use crate::harmonic::{self, EnergyField, QuadratureConfig, StratumConfig};
use crate::linalg::{dist, tree_sum, unit_ball_volume};
use crate::measure::AtomicMeasure;
use crate::moments::{self, DisplacementConfig};
use crate::spatial::{greedy_net, SpatialIndex};

/// A finite list of balls, optionally required to be pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    balls: Vec<Ball>,
    disjoint: bool,
}

impl BallFamily {
    /// With `disjoint` set, `|x_i - x_j| >= r_i + r_j` is checked for every pair.
    pub fn new(balls: Vec<Ball>, disjoint: bool) -> Result<Self> {
        if let Some(first) = balls.first() {
            let n = first.dim();
            if let Some(b) = balls.iter().find(|b| b.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: b.dim(),
                });
            }
        }
        if disjoint {
            if let Some((first, second)) = overlapping_pair(&balls, 1.0) {
                return Err(Error::NotDisjoint { first, second });
            }
        }
        Ok(Self { balls, disjoint })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn is_disjoint(&self) -> bool {
        self.disjoint
    }

    /// `sum_j omega_k r_j^k delta_{x_j}`.
    pub fn measure(&self, k: usize) -> Result<AtomicMeasure> {
        let n = self.balls.first().map_or(1, |b| b.dim());
        let omega = unit_ball_volume(k);
        AtomicMeasure::new(
            n,
            self.balls.iter().flat_map(|b| b.center.iter().copied()).collect(),
            self.balls.iter().map(|b| omega * b.radius.powi(k as i32)).collect(),
        )
    }

    pub fn subfamily(&self, indices: &[usize]) -> BallFamily {
        BallFamily {
            balls: indices.iter().map(|&i| self.balls[i].clone()).collect(),
            disjoint: self.disjoint,
        }
    }
}

/// First pair (by index) whose balls shrunk by `factor` overlap.
fn overlapping_pair(balls: &[Ball], factor: f64) -> Option<(usize, usize)> {
    if balls.is_empty() {
        return None;
    }
    let n = balls[0].dim();
    let flat: Vec<f64> = balls.iter().flat_map(|b| b.center.iter().copied()).collect();
    let index = SpatialIndex::new(&flat, n);
    let largest = balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    balls
        .par_iter()
        .enumerate()
        .filter_map(|(i, b)| {
            index
                .query(&b.center, factor * (b.radius + largest))
                .into_iter()
                .filter(|&j| j > i)
                .find(|&j| dist(&b.center, &balls[j].center) < factor * (b.radius + balls[j].radius))
                .map(|j| (i, j))
        })
        .min()
}

/// Splits center indices by `mu(B_r(x)) >= gamma_good r^k`.
pub fn classify_balls(
    mu: &AtomicMeasure,
    centers: &[Vec<f64>],
    r: f64,
    k: usize,
    cfg: &DisplacementConfig,
) -> (Vec<usize>, Vec<usize>) {
    let threshold = cfg.gamma_good * r.powi(k as i32);
    let good: Vec<bool> = centers
        .par_iter()
        .map(|c| {
            mu.mass_in(&Ball {
                center: c.clone(),
                radius: r,
            }) >= threshold
        })
        .collect();
    let (g, b): (Vec<usize>, Vec<usize>) = (0..centers.len()).partition(|&i| good[i]);
    (g, b)
}

/// Atoms of the ball farther than `next_radius / 4` from `plane`.
pub fn excess_set(mu: &AtomicMeasure, ball: &Ball, plane: &AffinePlane, next_radius: f64) -> Vec<usize> {
    mu.indices_in(ball)
        .into_iter()
        .filter(|&i| plane_distance(mu.position(i), plane) > next_radius / 4.0)
        .collect()
}

/// Greedy disjoint subfamily by descending radius (ties by index).
///
/// Every input ball meets a selected ball of at least its radius, so its
/// center lies in that ball's 5x dilate.
pub fn vitali_subcover(balls: &[Ball]) -> Vec<usize> {
    if balls.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.total_cmp(&balls[a].radius).then(a.cmp(&b)));
    let n = balls[0].dim();
    let flat: Vec<f64> = balls.iter().flat_map(|b| b.center.iter().copied()).collect();
    let index = SpatialIndex::new(&flat, n);
    let largest = balls[order[0]].radius;
    let mut selected = Vec::new();
    let mut chosen = vec![false; balls.len()];
    for &i in &order {
        let b = &balls[i];
        let clash = index
            .query_unordered(&b.center, b.radius + largest)
            .into_iter()
            .any(|j| chosen[j] && !b.disjoint_from(&balls[j]));
        if !clash {
            chosen[i] = true;
            selected.push(i);
        }
    }
    selected
}

/// Subfamilies in which `x_j in B_{R r_i}(x_i)` forces `r_j < r_i / R^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub subfamilies: Vec<Vec<usize>>,
    /// Greedy coloring bound: largest conflict degree plus one.
    pub bound: usize,
}

pub fn separated_decomposition(family: &BallFamily, big_r: f64) -> Result<Decomposition> {
    if !(big_r > 1.0) {
        return Err(Error::InvalidArgument(format!("R must exceed 1, got {big_r}")));
    }
    let balls = family.balls();
    if balls.is_empty() {
        return Ok(Decomposition {
            subfamilies: Vec::new(),
            bound: 1,
        });
    }
    if let Some((first, second)) = overlapping_pair(balls, 0.2) {
        return Err(Error::NotDisjoint { first, second });
    }
    let n = balls[0].dim();
    let flat: Vec<f64> = balls.iter().flat_map(|b| b.center.iter().copied()).collect();
    let index = SpatialIndex::new(&flat, n);
    let r2 = big_r * big_r;
    // i -> j conflicts: x_j in B_{R r_i}(x_i) with r_j >= r_i / R^2.
    let outgoing: Vec<Vec<usize>> = balls
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            index
                .query(&b.center, big_r * b.radius)
                .into_iter()
                .filter(|&j| {
                    j != i
                        && dist(&b.center, &balls[j].center) < big_r * b.radius
                        && balls[j].radius >= b.radius / r2
                })
                .collect()
        })
        .collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); balls.len()];
    for (i, out) in outgoing.iter().enumerate() {
        for &j in out {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    let bound = adjacency.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.total_cmp(&balls[a].radius).then(a.cmp(&b)));
    let mut color = vec![usize::MAX; balls.len()];
    let mut subfamilies: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let used: Vec<usize> = adjacency[i].iter().map(|&j| color[j]).filter(|&c| c != usize::MAX).collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap_or(0);
        color[i] = c;
        if c == subfamilies.len() {
            subfamilies.push(Vec::new());
        }
        subfamilies[c].push(i);
    }
    for s in &mut subfamilies {
        s.sort_unstable();
    }
    Ok(Decomposition { subfamilies, bound })
}

/// Settings for [`discrete_reifenberg_verify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingConfig {
    pub k: usize,
    /// Hypothesis threshold: the normalized integral must stay below `delta^2`.
    pub delta: f64,
    pub eps_mass: f64,
    /// Test and integration scales lie in `[r_min, r_max]`, dyadic from `r_max`.
    pub r_min: f64,
    pub r_max: f64,
    /// Packing bound compared with the raw sum.
    pub bound: f64,
    /// The packing sum is taken over centers in this ball.
    pub window: Ball,
}

impl PackingConfig {
    pub fn new(n: usize, k: usize, delta: f64) -> Self {
        Self {
            k,
            delta,
            eps_mass: DisplacementConfig::new(k).eps_mass,
            r_min: 1e-2,
            r_max: 1.0,
            bound: 10.0,
            window: Ball {
                center: vec![0.0; n],
                radius: 1.0,
            },
        }
    }

    fn scales(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut s = self.r_max;
        while s >= self.r_min * (1.0 - 1e-12) {
            out.push(s);
            s *= 0.5;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingReport {
    pub hypothesis_ok: bool,
    /// Ball with the largest `value / delta^2`.
    pub worst_ball: Option<usize>,
    pub worst_value: f64,
    /// Scale of the worst ball when it fails the hypothesis.
    pub failure_scale: Option<f64>,
    pub packing_sum: f64,
    pub bound_exceeded: bool,
    pub balls_checked: usize,
}

/// Checks `r^{-k} int_{B_r(x)} sum_s D(y, s) ln 2 dmu(y) < delta^2` on every
/// test ball `B_r(x_j)` with enough mass, then sums `r_j^k` over the window.
pub fn discrete_reifenberg_verify(family: &BallFamily, cfg: &PackingConfig) -> Result<PackingReport> {
    if !family.is_disjoint() {
        return Err(Error::InvalidArgument("packing verification needs a disjoint family".into()));
    }
    let k = cfg.k;
    let packing_sum = tree_sum(
        &family
            .balls()
            .iter()
            .filter(|b| cfg.window.contains(&b.center))
            .map(|b| b.radius.powi(k as i32))
            .collect::<Vec<_>>(),
    );
    if family.is_empty() {
        return Ok(PackingReport {
            hypothesis_ok: true,
            worst_ball: None,
            worst_value: 0.0,
            failure_scale: None,
            packing_sum,
            bound_exceeded: packing_sum > cfg.bound,
            balls_checked: 0,
        });
    }
    let mu = family.measure(k)?;
    let dcfg = DisplacementConfig {
        eps_mass: cfg.eps_mass,
        ..DisplacementConfig::new(k)
    };
    let scales = cfg.scales();
    // prefix[j][a]: sum over scales finer than or equal to scales[a] of D ln 2
    let prefix: Vec<Vec<f64>> = (0..mu.len())
        .into_par_iter()
        .map(|j| {
            let x = mu.position(j);
            let mut acc = 0.0;
            let mut out = vec![0.0; scales.len()];
            for a in (0..scales.len()).rev() {
                acc += moments::displacement(&mu, x, scales[a], k, &dcfg) * std::f64::consts::LN_2;
                out[a] = acc;
            }
            out
        })
        .collect();
    let results: Vec<(usize, usize, f64, bool)> = (0..mu.len())
        .into_par_iter()
        .flat_map_iter(|j| {
            let x = mu.position(j).to_vec();
            let mu = &mu;
            let prefix = &prefix;
            scales.iter().enumerate().map(move |(a, &s)| {
                let ball = Ball {
                    center: x.clone(),
                    radius: s,
                };
                let idx = mu.indices_in(&ball);
                let mass: f64 = idx.iter().map(|&i| mu.weight(i)).sum();
                if mass < cfg.eps_mass * s.powi(k as i32) {
                    return (j, a, 0.0, false);
                }
                let terms: Vec<f64> = idx.iter().map(|&i| mu.weight(i) * prefix[i][a]).collect();
                (j, a, tree_sum(&terms) / s.powi(k as i32), true)
            })
        })
        .collect();
    let delta2 = cfg.delta * cfg.delta;
    let checked: Vec<&(usize, usize, f64, bool)> = results.iter().filter(|r| r.3).collect();
    let worst = checked
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)).then(b.1.cmp(&a.1)))
        .copied();
    let hypothesis_ok = checked.iter().all(|r| r.2 < delta2);
    Ok(PackingReport {
        hypothesis_ok,
        worst_ball: worst.map(|w| w.0),
        worst_value: worst.map_or(0.0, |w| w.2 / delta2),
        failure_scale: if hypothesis_ok { None } else { worst.map(|w| scales[w.1]) },
        packing_sum,
        bound_exceeded: packing_sum > cfg.bound,
        balls_checked: checked.len(),
    })
}

/// Volume of a union of balls by counting grid cells of side `cell`.
pub fn union_volume(balls: &[Ball], cell: f64) -> f64 {
    if balls.is_empty() {
        return 0.0;
    }
    let n = balls[0].dim();
    let flat: Vec<f64> = balls.iter().flat_map(|b| b.center.iter().copied()).collect();
    let index = SpatialIndex::new(&flat, n);
    let largest = balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let lo: Vec<i64> = (0..n)
        .map(|a| (balls.iter().map(|b| b.center[a] - b.radius).fold(f64::INFINITY, f64::min) / cell).floor() as i64)
        .collect();
    let hi: Vec<i64> = (0..n)
        .map(|a| (balls.iter().map(|b| b.center[a] + b.radius).fold(f64::NEG_INFINITY, f64::max) / cell).ceil() as i64)
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
            index
                .query_unordered(&c, largest)
                .into_iter()
                .any(|j| balls[j].contains(&c))
        })
        .count();
    inside as f64 * cell.powi(n as i32)
}

/// Settings for [`inductive_cover`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverConfig {
    pub stratum: StratumConfig,
    /// Stratum grid spacing; defaults to `r`.
    pub grid_step: Option<f64>,
    pub quadrature: QuadratureConfig,
    pub max_levels: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self {
            stratum: StratumConfig::default(),
            grid_step: None,
            quadrature: QuadratureConfig::default(),
            max_levels: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    /// Energy dropped by `eta`; recursed on at the next level.
    Good,
    Bad,
    /// Radius `r`; terminal.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: BallKind,
    /// `sup theta_radius` over stratum samples in the ball.
    pub sup_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverLevel {
    pub level: usize,
    /// Energy bound entering this level (largest over its roots).
    pub energy: f64,
    pub balls: Vec<CoverBall>,
    /// `sum r_i^k` over this level's good balls.
    pub good_content: f64,
    /// `r^{k-n} Vol(B_r(U_r))` over final centers found so far.
    pub final_content: f64,
    /// Largest refinement count `N_i` at this level.
    pub max_refinement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub k: usize,
    pub eps: f64,
    pub r: f64,
    pub eta: f64,
    /// `sup theta_R` over the stratum samples of the root ball.
    pub energy: f64,
    /// `ceil(energy / eta)`: the level count the energy drop allows.
    pub level_bound: usize,
    pub levels: Vec<CoverLevel>,
    pub stratum: Vec<Vec<f64>>,
    /// Samples whose energy could not be evaluated; kept uncovered.
    pub skipped: Vec<Vec<f64>>,
    /// `N(n, eta) = ((1 + eta) / eta)^n`.
    pub refinement_bound: f64,
    pub good_content: f64,
    pub final_content: f64,
}

impl CoverReport {
    pub fn final_balls(&self) -> impl Iterator<Item = &CoverBall> {
        self.levels.iter().flat_map(|l| l.balls.iter()).filter(|b| b.kind == BallKind::Final)
    }

    /// Good balls of the last level; empty once the recursion terminated.
    pub fn open_balls(&self) -> &[CoverBall] {
        self.levels.last().map_or(&[], |l| &l.balls[..])
    }
}

struct Root {
    ball: Ball,
    energy: f64,
    samples: Vec<usize>,
}

/// Covers the quantitative stratum in `root` level by level.
///
/// At each root `B_R` with energy bound `E`, a sample's energy scale is the
/// smallest dyadic `s = 2^{-j} R >= r` with `sup_{B_s(x)} theta_{eta s} >= E - eta`
/// (`R` when none). Samples at the finest such scale get an `r/5`-net of final balls of
/// radius `r`; the rest get a Vitali subcover of `B_{s_x/10}(x)`, each
/// selected ball `B_{s_x/2}(x)` refined into balls of radius `eta s_x/2`
/// that become next-level roots with energy at most `E - eta`.
pub fn inductive_cover(
    field: &EnergyField,
    root: &Ball,
    k: usize,
    eps: f64,
    r: f64,
    eta: f64,
    cfg: &CoverConfig,
) -> Result<CoverReport> {
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1/2], got {eta}")));
    }
    if !(r > 0.0 && r < root.radius) {
        return Err(Error::InvalidArgument(format!("need 0 < r < root radius, got {r}")));
    }
    let n = field.domain_dim();
    let step = cfg.grid_step.unwrap_or(r);
    let stratum = harmonic::quantitative_stratum_in(field, root, k, eps, r, step, &cfg.stratum)?;
    let points = stratum.points;
    let q = &cfg.quadrature;
    let theta_at = |i: usize, s: f64| -> Option<f64> { harmonic::theta_with(field, &points[i], s, q).ok() };

    let root_theta: Vec<Option<f64>> = (0..points.len()).into_par_iter().map(|i| theta_at(i, root.radius)).collect();
    let skipped: Vec<usize> = (0..points.len()).filter(|&i| root_theta[i].is_none()).collect();
    let usable: Vec<usize> = (0..points.len()).filter(|&i| root_theta[i].is_some()).collect();
    let energy = usable.iter().map(|&i| root_theta[i].unwrap_or(0.0)).fold(0.0, f64::max);
    let refinement_bound = ((1.0 + eta) / eta).powi(n as i32);
    let level_bound = (energy / eta).ceil() as usize;

    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let index = SpatialIndex::new(&flat, n);
    let mut roots = if usable.is_empty() {
        Vec::new()
    } else {
        vec![Root {
            ball: root.clone(),
            energy,
            samples: usable,
        }]
    };
    let mut levels = Vec::new();
    let mut finals: Vec<Vec<f64>> = Vec::new();
    let kn = r.powi(k as i32 - n as i32);
    let mut good_total = 0.0;
    while !roots.is_empty() && levels.len() < cfg.max_levels {
        let level_energy = roots.iter().map(|t| t.energy).fold(0.0, f64::max);
        let outcomes: Vec<Result<(Vec<CoverBall>, Vec<Root>, usize)>> = roots
            .par_iter()
            .map(|t| cover_root(field, t, &points, &index, r, eta, refinement_bound, q))
            .collect();
        let mut balls = Vec::new();
        let mut next = Vec::new();
        let mut max_refinement = 0;
        for o in outcomes {
            let (b, children, refine) = o?;
            balls.extend(b);
            next.extend(children);
            max_refinement = max_refinement.max(refine);
        }
        finals.extend(balls.iter().filter(|b| b.kind == BallKind::Final).map(|b| b.center.clone()));
        let good_content = tree_sum(
            &balls
                .iter()
                .filter(|b| b.kind == BallKind::Good)
                .map(|b| b.radius.powi(k as i32))
                .collect::<Vec<_>>(),
        );
        good_total += good_content;
        levels.push(CoverLevel {
            level: levels.len(),
            energy: level_energy,
            balls,
            good_content,
            final_content: kn * harmonic::tube_volume(&finals, r, r / 8.0),
            max_refinement,
        });
        roots = next;
    }
    let final_content = levels.last().map_or(0.0, |l| l.final_content);
    Ok(CoverReport {
        k,
        eps,
        r,
        eta,
        energy,
        level_bound,
        levels,
        skipped: skipped.into_iter().map(|i| points[i].clone()).collect(),
        stratum: points,
        refinement_bound,
        good_content: good_total,
        final_content,
    })
}

#[allow(clippy::too_many_arguments)]
fn cover_root(
    field: &EnergyField,
    root: &Root,
    points: &[Vec<f64>],
    index: &SpatialIndex,
    r: f64,
    eta: f64,
    refinement_bound: f64,
    q: &QuadratureConfig,
) -> Result<(Vec<CoverBall>, Vec<Root>, usize)> {
    let theta = |i: usize, s: f64| harmonic::theta_with(field, &points[i], s, q).unwrap_or(f64::NEG_INFINITY);
    let in_root = |i: usize| root.samples.binary_search(&i).is_ok();
    let scales: Vec<f64> = {
        let mut out = Vec::new();
        let mut s = root.ball.radius;
        while s >= r * (1.0 - 1e-12) {
            out.push(s);
            s *= 0.5;
        }
        out.reverse();
        out
    };
    // sup over samples within s of x of theta_{eta s}, per scale
    let energy_at: Vec<Vec<f64>> = scales
        .iter()
        .map(|&s| root.samples.par_iter().map(|&i| theta(i, eta * s)).collect())
        .collect();
    let position = |i: usize| root.samples.binary_search(&i).unwrap_or(0);
    let scale_of: Vec<f64> = root
        .samples
        .par_iter()
        .map(|&i| {
            for (a, &s) in scales.iter().enumerate() {
                let hit = index
                    .query_unordered(&points[i], s)
                    .into_iter()
                    .filter(|&j| in_root(j))
                    .any(|j| energy_at[a][position(j)] >= root.energy - eta);
                if hit {
                    return s;
                }
            }
            root.ball.radius
        })
        .collect();
    // The finest available scale lies in [r, 2r); samples there are final.
    let finest = scales.first().copied().unwrap_or(f64::INFINITY);
    let is_final = |a: usize| scales.is_empty() || scale_of[a] <= finest;
    let at_r: Vec<usize> = (0..root.samples.len()).filter(|&a| is_final(a)).map(|a| root.samples[a]).collect();
    let mut balls = Vec::new();
    for i in greedy_net(|i| &points[i][..], &at_r, r / 5.0) {
        let sup = sup_theta(field, points, index, &in_root, &points[i], r, q);
        balls.push(CoverBall {
            center: points[i].clone(),
            radius: r,
            kind: BallKind::Final,
            sup_theta: sup,
        });
    }
    let larger: Vec<usize> = (0..root.samples.len()).filter(|&a| !is_final(a)).collect();
    let candidates: Vec<Ball> = larger
        .iter()
        .map(|&a| Ball {
            center: points[root.samples[a]].clone(),
            radius: scale_of[a] / 10.0,
        })
        .collect();
    let mut children = Vec::new();
    let mut max_refinement = 0;
    for c in vitali_subcover(&candidates) {
        let center = &candidates[c].center;
        let rho = 5.0 * candidates[c].radius;
        let inner: Vec<usize> = index
            .query(center, rho / 2.0)
            .into_iter()
            .filter(|&j| in_root(j))
            .collect();
        let net = greedy_net(|i| &points[i][..], &inner, eta * rho);
        if net.len() as f64 > refinement_bound {
            return Err(Error::InvalidArgument(format!(
                "refinement produced {} balls, above the bound {refinement_bound}",
                net.len()
            )));
        }
        max_refinement = max_refinement.max(net.len());
        for z in net {
            let radius = eta * rho;
            let mut samples: Vec<usize> = index
                .query(&points[z], radius)
                .into_iter()
                .filter(|&j| in_root(j))
                .collect();
            samples.sort_unstable();
            let sup = samples.iter().map(|&j| theta(j, radius)).fold(f64::NEG_INFINITY, f64::max);
            balls.push(CoverBall {
                center: points[z].clone(),
                radius,
                kind: BallKind::Good,
                sup_theta: sup,
            });
            children.push(Root {
                ball: Ball {
                    center: points[z].clone(),
                    radius,
                },
                energy: sup,
                samples,
            });
        }
    }
    Ok((balls, children, max_refinement))
}

fn sup_theta<F: Fn(usize) -> bool>(
    field: &EnergyField,
    points: &[Vec<f64>],
    index: &SpatialIndex,
    in_root: &F,
    center: &[f64],
    radius: f64,
    q: &QuadratureConfig,
) -> f64 {
    index
        .query(center, radius)
        .into_iter()
        .filter(|&j| in_root(j))
        .map(|j| harmonic::theta_with(field, &points[j], radius, q).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
}
