//! Second-moment plane fitting and the k-dimensional displacement.
//!
//! `D^k(x, r) = r^{-(k+2)} * min_L sum_{x_j in B_r(x)} w_j d(x_j, L)^2`, set to
//! zero when the ball carries less than `eps_mass * r^k` mass. The minimum is
//! the tail `lambda_{k+1} + ... + lambda_n` of the second-moment spectrum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{plane_distance, AffinePlane, Ball};
use crate::linalg::{self, dist, sub, tree_sum, unit_ball_volume};
use crate::measure::AtomicMeasure;

/// Thresholds for the displacement cutoff, good-ball test, scale ratio and
/// smallness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementConfig {
    pub eps_mass: f64,
    pub gamma_good: f64,
    pub rho: f64,
    pub delta: f64,
    /// Smallest dyadic scale included in displacement sums. `None` sums down
    /// to the scale where every ball holds a single atom position.
    pub finest_scale: Option<f64>,
}

impl DisplacementConfig {
    /// Working defaults for intrinsic dimension `k`.
    pub fn new(k: usize) -> Self {
        let omega = unit_ball_volume(k);
        Self {
            eps_mass: 1e-3 * omega,
            gamma_good: omega * 4f64.powi(-(k as i32)),
            rho: 0.5,
            delta: 0.1,
            finest_scale: None,
        }
    }

    /// The literal constants for ambient dimension `n`: `(1000n)^{-7n^2}`,
    /// `omega_k 40^{-k}` and the largest power of 1/2 below
    /// `1e-10 (100n)^{-3n}`.
    pub fn strict(n: usize, k: usize) -> Self {
        let nf = n as f64;
        let eps = (1000.0 * nf).powf(-7.0 * nf * nf);
        let rho_bound = 1e-10 * (100.0 * nf).powf(-3.0 * nf);
        let q = (-rho_bound.log2()).ceil();
        Self {
            eps_mass: eps,
            gamma_good: unit_ball_volume(k) * 40f64.powi(-(k as i32)),
            rho: 2f64.powf(-q),
            delta: 0.1,
            finest_scale: None,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_mass, self.gamma_good, self.rho, self.delta]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(Error::InvalidArgument("configuration values must be positive".into()));
        }
        let q = -self.rho.log2();
        if self.rho >= 1.0 || (q - q.round()).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "rho must be a power of 1/2 below 1, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Center of mass, sorted second moments and principal directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSpectrum {
    pub x_cm: Vec<f64>,
    pub mass: f64,
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Trace of the second-moment matrix.
    pub trace: f64,
}

impl MomentSpectrum {
    /// `lambda_{k+1} + ... + lambda_n`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.eigenvalues.iter().skip(k).sum()
    }

    /// Plane through the center of mass spanned by the top `k` directions.
    pub fn plane(&self, k: usize) -> AffinePlane {
        AffinePlane::from_orthonormal(self.x_cm.clone(), self.eigenvectors[..k].to_vec())
    }
}

fn empty(ball: &Ball) -> Error {
    Error::EmptySupport {
        center: ball.center.clone(),
        radius: ball.radius,
    }
}

fn weighted_mean(mu: &AtomicMeasure, idx: &[usize]) -> Option<(Vec<f64>, f64)> {
    let n = mu.dim();
    let mass: f64 = idx.iter().map(|&i| mu.weight(i)).sum();
    if !(mass > 0.0) {
        return None;
    }
    let mut c = vec![0.0; n];
    for &i in idx {
        linalg::axpy(&mut c, mu.weight(i), mu.position(i));
    }
    c.iter_mut().for_each(|v| *v /= mass);
    Some((c, mass))
}

/// Weighted mean of the atoms in the ball.
pub fn center_of_mass(mu: &AtomicMeasure, ball: &Ball) -> Result<Vec<f64>> {
    weighted_mean(mu, &mu.indices_in(ball))
        .map(|(c, _)| c)
        .ok_or_else(|| empty(ball))
}

/// Spectrum of `M = sum w_j (x_j - x_cm)(x_j - x_cm)^T` over atoms in the ball.
pub fn second_moment_spectrum(mu: &AtomicMeasure, ball: &Ball) -> Result<MomentSpectrum> {
    spectrum_of(mu, &mu.indices_in(ball)).ok_or_else(|| empty(ball))
}

/// Second-moment matrix (row-major) and the center of mass of chosen atoms.
pub fn moment_matrix(mu: &AtomicMeasure, idx: &[usize]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = mu.dim();
    let (x_cm, mass) = weighted_mean(mu, idx)?;
    let mut m = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    for &i in idx {
        let w = mu.weight(i);
        for (da, (p, c)) in d.iter_mut().zip(mu.position(i).iter().zip(&x_cm)) {
            *da = p - c;
        }
        for a in 0..n {
            let wa = w * d[a];
            for b in a..n {
                m[a * n + b] += wa * d[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            m[a * n + b] = m[b * n + a];
        }
    }
    Some((m, x_cm, mass))
}

pub(crate) fn spectrum_of(mu: &AtomicMeasure, idx: &[usize]) -> Option<MomentSpectrum> {
    let n = mu.dim();
    let (m, x_cm, mass) = moment_matrix(mu, idx)?;
    let trace = (0..n).map(|i| m[i * n + i]).sum();
    let eig = linalg::sym_eigen(&m, n);
    Some(MomentSpectrum {
        x_cm,
        mass,
        eigenvalues: eig.values.iter().map(|v| v.max(0.0)).collect(),
        eigenvectors: eig.vectors,
        trace,
    })
}

/// Best-fit k-plane in the least-squares sense over atoms in the ball.
pub fn best_affine_plane(mu: &AtomicMeasure, ball: &Ball, k: usize) -> Result<AffinePlane> {
    if k > mu.dim() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds ambient dimension {}", mu.dim())));
    }
    Ok(second_moment_spectrum(mu, ball)?.plane(k))
}

/// `sum w_j d(x_j, L)^2` over atoms in the ball, computed directly.
pub fn plane_residual(mu: &AtomicMeasure, ball: &Ball, plane: &AffinePlane) -> f64 {
    mu.indices_in(ball)
        .iter()
        .map(|&i| mu.weight(i) * plane_distance(mu.position(i), plane).powi(2))
        .sum()
}

/// The k-dimensional displacement with the mass cutoff.
pub fn displacement(mu: &AtomicMeasure, x: &[f64], r: f64, k: usize, cfg: &DisplacementConfig) -> f64 {
    let ball = Ball {
        center: x.to_vec(),
        radius: r,
    };
    let idx = mu.indices_in_unordered(&ball);
    displacement_of(mu, &idx, r, k, Some(cfg.eps_mass))
}

/// The fitted displacement without any cutoff (zero for an empty ball).
pub fn fitted_displacement(mu: &AtomicMeasure, x: &[f64], r: f64, k: usize) -> f64 {
    let ball = Ball {
        center: x.to_vec(),
        radius: r,
    };
    displacement_of(mu, &mu.indices_in_unordered(&ball), r, k, None)
}

fn displacement_of(mu: &AtomicMeasure, idx: &[usize], r: f64, k: usize, eps_mass: Option<f64>) -> f64 {
    let mass: f64 = idx.iter().map(|&i| mu.weight(i)).sum();
    if let Some(eps) = eps_mass {
        if mass < eps * r.powi(k as i32) {
            return 0.0;
        }
    }
    if idx.len() <= k + 1 || !(mass > 0.0) {
        return 0.0;
    }
    match spectrum_of(mu, idx) {
        Some(s) => s.tail_sum(k) / r.powi(k as i32 + 2),
        None => 0.0,
    }
}

/// One dyadic scale of a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub alpha: i32,
    pub scale: f64,
    pub displacement: f64,
    pub mass: f64,
}

/// Displacements at `r_alpha = 2^{-alpha}` for `alpha_min ..= alpha_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicProfile {
    pub center: Vec<f64>,
    pub k: usize,
    pub entries: Vec<ProfileEntry>,
}

pub fn dyadic_scale(alpha: i32) -> f64 {
    2f64.powi(-alpha)
}

pub fn dyadic_profile(
    mu: &AtomicMeasure,
    x: &[f64],
    k: usize,
    alpha_min: i32,
    alpha_max: i32,
    cfg: &DisplacementConfig,
) -> Result<DyadicProfile> {
    if alpha_min > alpha_max {
        return Err(Error::InvalidArgument(format!(
            "alpha_min {alpha_min} exceeds alpha_max {alpha_max}"
        )));
    }
    let entries = (alpha_min..=alpha_max)
        .into_par_iter()
        .map(|alpha| {
            let r = dyadic_scale(alpha);
            let ball = Ball {
                center: x.to_vec(),
                radius: r,
            };
            ProfileEntry {
                alpha,
                scale: r,
                displacement: displacement(mu, x, r, k, cfg),
                mass: mu.mass_in(&ball),
            }
        })
        .collect();
    Ok(DyadicProfile {
        center: x.to_vec(),
        k,
        entries,
    })
}

/// Outcome of a summability check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summability {
    pub holds: bool,
    pub value: f64,
}

/// Smallest dyadic exponent `alpha` with `2^{-alpha} <= r`.
pub fn alpha_at_most(r: f64) -> i32 {
    let mut a = (-r.log2()).ceil() as i32;
    while dyadic_scale(a) > r {
        a += 1;
    }
    while dyadic_scale(a - 1) <= r {
        a -= 1;
    }
    a
}

/// Per-atom sums `sum_{alpha >= alpha_0} D(x_j, r_alpha)` for the listed atoms.
///
/// Scales stop at `cfg.finest_scale` when set, otherwise below the atom's
/// neighbor gap where the ball holds a single position and `D` vanishes.
pub fn displacement_sums(
    mu: &AtomicMeasure,
    atoms: &[usize],
    alpha_0: i32,
    k: usize,
    cfg: &DisplacementConfig,
) -> Vec<f64> {
    let gaps = match cfg.finest_scale {
        Some(_) => Vec::new(),
        None => mu.neighbor_gaps(),
    };
    atoms
        .par_iter()
        .map(|&j| {
            let x = mu.position(j);
            let floor = match cfg.finest_scale {
                Some(s) => s,
                None => gaps[j],
            };
            let mut terms = Vec::new();
            let mut alpha = alpha_0;
            while terms.len() < 64 {
                let r = dyadic_scale(alpha);
                let below = match cfg.finest_scale {
                    Some(_) => r < floor,
                    None => !floor.is_finite() || r < floor,
                };
                if below {
                    break;
                }
                terms.push(displacement(mu, x, r, k, cfg));
                alpha += 1;
            }
            tree_sum(&terms)
        })
        .collect()
}

/// `r^{-k} sum_{r_alpha <= r} sum_{x_j in ball} w_j D(x_j, r_alpha)` against `delta^2`.
pub fn summability_check(
    mu: &AtomicMeasure,
    ball: &Ball,
    k: usize,
    cfg: &DisplacementConfig,
) -> Summability {
    let atoms = mu.indices_in(ball);
    let sums = displacement_sums(mu, &atoms, alpha_at_most(ball.radius), k, cfg);
    let terms: Vec<f64> = atoms.iter().zip(&sums).map(|(&j, s)| mu.weight(j) * s).collect();
    let value = tree_sum(&terms) / ball.radius.powi(k as i32);
    Summability {
        holds: value < cfg.delta * cfg.delta,
        value,
    }
}

/// Greedy search for `k + 1` atoms in the ball that `alpha`-effectively span
/// a k-plane.
///
/// Each starting atom (closest to the ball center first, up to 16 tried)
/// seeds a chain where the next point is the one farthest from the current
/// affine span among atoms within `1/alpha` of the start.
pub fn effective_spanning_points(
    mu: &AtomicMeasure,
    ball: &Ball,
    k: usize,
    alpha: f64,
) -> Option<Vec<Vec<f64>>> {
    let mut idx = mu.indices_in(ball);
    if idx.len() < k + 1 || !(alpha > 0.0) {
        return None;
    }
    idx.sort_by(|&a, &b| {
        dist(mu.position(a), &ball.center)
            .total_cmp(&dist(mu.position(b), &ball.center))
            .then(a.cmp(&b))
    });
    for &start in idx.iter().take(16) {
        let p0 = mu.position(start);
        let reach: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&j| dist(mu.position(j), p0) <= 1.0 / alpha)
            .collect();
        let mut chosen = vec![p0.to_vec()];
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut ok = true;
        for _ in 0..k {
            let span = AffinePlane::from_orthonormal(p0.to_vec(), basis.clone());
            let best = reach
                .iter()
                .map(|&j| (j, plane_distance(mu.position(j), &span)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match best {
                Some((j, d)) if d >= alpha => {
                    let p = mu.position(j).to_vec();
                    let normal = span.normal_part(&sub(&p, p0));
                    basis.push(linalg::scale(&normal, 1.0 / linalg::norm(&normal)));
                    chosen.push(p);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(chosen);
        }
    }
    None
}
