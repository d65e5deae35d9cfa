use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rectify_core::covering::{self, BallFamily, CoverConfig, CoverLevel, PackingConfig, PackingReport};
use rectify_core::harmonic::{self, EnergyField, MinkowskiProfile, StratumConfig};
use rectify_core::moments::{self, DisplacementConfig, DyadicProfile};
use rectify_core::reifenberg::{self, AtlasReport, ReconstructParams};
use rectify_core::spatial::greedy_net;
use rectify_core::{hausdorff_distance, Ball};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::fixtures::{self, Cloud};
use crate::{io, report};

/// What a finished command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: PathBuf,
    pub extra: Vec<PathBuf>,
    pub summary: String,
    /// 0, or 4 when the report was written but flags a violated hypothesis.
    pub code: u8,
}

pub fn dispatch(cfg: &RunConfig) -> CliResult<Outcome> {
    match cfg.command {
        Command::Beta => beta(cfg),
        Command::FitPlane => fit_plane(cfg),
        Command::Reconstruct => reconstruct(cfg),
        Command::Pack => pack(cfg),
        Command::Stratify => stratify(cfg),
    }
}

fn load_cloud(cfg: &RunConfig) -> CliResult<Cloud> {
    match (&cfg.input, &cfg.fixture) {
        (Some(path), _) => {
            let measure = io::read_measure(path, cfg.dim)?;
            Ok(Cloud {
                measure,
                k: 1,
                truth: None,
            })
        }
        (None, Some(name)) => fixtures::cloud(name, cfg.dim, cfg.seed),
        (None, None) => Err(CliError::Usage("either --input or --fixture is required".into())),
    }
}

fn intrinsic_dim(cfg: &RunConfig, cloud: &Cloud) -> CliResult<usize> {
    let k = cfg.k.unwrap_or(cloud.k);
    cfg.check_dims(cloud.measure.dim(), k)?;
    Ok(k)
}

#[derive(Debug, Clone, Serialize)]
pub struct BallVerdict {
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaReport {
    pub n: usize,
    pub k: usize,
    pub atoms: usize,
    pub displacement: DisplacementConfig,
    pub alpha_min: i32,
    pub alpha_max: i32,
    /// "holds" when every test ball satisfies the summability bound.
    pub verdict: &'static str,
    pub value: f64,
    pub worst_ball: Option<BallVerdict>,
    pub balls: Vec<BallVerdict>,
    pub profiles: Vec<DyadicProfile>,
}

/// Profiles at every atom and summability on balls of radius `2^-alpha_min`
/// centered at a net of atoms.
pub fn beta(cfg: &RunConfig) -> CliResult<Outcome> {
    let cloud = load_cloud(cfg)?;
    let k = intrinsic_dim(cfg, &cloud)?;
    let mu = &cloud.measure;
    let a0 = cfg.alpha_min.unwrap_or(0);
    let a1 = cfg.alpha_max.unwrap_or(8);
    if a0 > a1 {
        return Err(CliError::Usage(format!("--alpha-min {a0} exceeds --alpha-max {a1}")));
    }
    let mut dcfg = cfg.displacement(k)?;
    dcfg.finest_scale = Some(cfg.r_min.unwrap_or(moments::dyadic_scale(a1)));
    let profiles = (0..mu.len())
        .into_par_iter()
        .map(|j| moments::dyadic_profile(mu, mu.position(j), k, a0, a1, &dcfg))
        .collect::<rectify_core::Result<Vec<_>>>()?;
    let r = moments::dyadic_scale(a0);
    let all: Vec<usize> = (0..mu.len()).collect();
    let centers = greedy_net(|j| mu.position(j), &all, r);
    let balls: Vec<BallVerdict> = centers
        .par_iter()
        .map(|&c| {
            let ball = Ball {
                center: mu.position(c).to_vec(),
                radius: r,
            };
            let s = moments::summability_check(mu, &ball, k, &dcfg);
            BallVerdict {
                center: ball.center,
                radius: r,
                value: s.value,
                holds: s.holds,
            }
        })
        .collect();
    let worst = balls
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0)))
        .map(|(_, b)| b.clone());
    let holds = balls.iter().all(|b| b.holds);
    let value = worst.as_ref().map_or(0.0, |b| b.value);
    let result = BetaReport {
        n: mu.dim(),
        k,
        atoms: mu.len(),
        displacement: dcfg,
        alpha_min: a0,
        alpha_max: a1,
        verdict: if holds { "holds" } else { "fails" },
        value,
        worst_ball: worst.clone(),
        balls,
        profiles,
    };
    let path = cfg.report_path();
    report::write(&path, cfg, &result)?;
    let mut summary = format!("summability {} (value {value:.6e})", result.verdict);
    if let (false, Some(w)) = (holds, &worst) {
        summary.push_str(&format!("; worst ball center {:?} radius {}", w.center, w.radius));
    }
    Ok(Outcome {
        report: path,
        extra: Vec::new(),
        summary,
        code: 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub k: usize,
    pub ball: Ball,
    pub mass: f64,
    pub center_of_mass: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub residual: f64,
    pub tail_sum: f64,
    pub displacement: f64,
}

/// Best k-plane for the atoms in the bounding ball.
pub fn fit_plane(cfg: &RunConfig) -> CliResult<Outcome> {
    let cloud = load_cloud(cfg)?;
    let k = intrinsic_dim(cfg, &cloud)?;
    let mu = &cloud.measure;
    let ball = mu.bounds().clone();
    let spectrum = moments::second_moment_spectrum(mu, &ball)?;
    let plane = spectrum.plane(k);
    let residual = moments::plane_residual(mu, &ball, &plane);
    let result = FitReport {
        n: mu.dim(),
        k,
        mass: spectrum.mass,
        center_of_mass: spectrum.x_cm.clone(),
        eigenvalues: spectrum.eigenvalues.clone(),
        eigenvectors: spectrum.eigenvectors.clone(),
        base: plane.base().to_vec(),
        basis: plane.directions().to_vec(),
        residual,
        tail_sum: spectrum.tail_sum(k),
        displacement: moments::fitted_displacement(mu, &ball.center, ball.radius, k),
        ball,
    };
    let path = cfg.report_path();
    report::write(&path, cfg, &result)?;
    Ok(Outcome {
        summary: format!("residual {residual:.6e}, tail {:.6e}", result.tail_sum),
        report: path,
        extra: Vec::new(),
        code: 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructReport {
    /// The construction ran but its summability hypothesis failed.
    pub partial: bool,
    pub displacement: DisplacementConfig,
    pub params: ReconstructParams,
    /// `measure_estimate` over a ball containing every atom.
    pub measure_estimate: f64,
    pub hausdorff_to_truth: Option<f64>,
    pub atlas: AtlasReport,
}

pub fn reconstruct(cfg: &RunConfig) -> CliResult<Outcome> {
    let cloud = load_cloud(cfg)?;
    let k = intrinsic_dim(cfg, &cloud)?;
    let mu = &cloud.measure;
    let dcfg = cfg.displacement(k)?;
    let mut params = ReconstructParams::new(64);
    if let Some(a) = cfg.alpha_min {
        params = params.with_root_scale(moments::dyadic_scale(a));
    }
    if let Some(a) = cfg.alpha_max {
        params = params.with_min_scale(moments::dyadic_scale(a));
    }
    if let Some(r) = cfg.r_min {
        params = params.with_min_scale(r);
    }
    if let Some(h) = cfg.grid_step {
        params = params.with_sample_spacing(h);
    }
    let atlas = reifenberg::reconstruct(mu, k, &dcfg, &params)?;
    let truth = match &cfg.truth {
        Some(path) => Some(io::read_measure(path, Some(mu.dim()))?.points()),
        None => cloud.truth.clone(),
    };
    let surface = atlas.points(atlas.step_count(), &atlas.owned_samples());
    let hausdorff_to_truth = match truth {
        Some(t) if !surface.is_empty() => Some(hausdorff_distance(&surface, &t)?),
        _ => None,
    };
    let b = mu.bounds();
    let whole = Ball {
        center: b.center.clone(),
        radius: b.radius * 1.05 + 1e-12,
    };
    let measure_estimate = reifenberg::measure_estimate(&atlas, &whole)?;
    let partial = !atlas.hypothesis_ok;
    let result = ReconstructReport {
        partial,
        displacement: dcfg,
        params,
        measure_estimate,
        hausdorff_to_truth,
        atlas: atlas.report(),
    };
    let path = cfg.report_path();
    report::write(&path, cfg, &result)?;
    let mut summary = format!(
        "{} steps to scale {:.4e}, distortion {:.6}, measure {measure_estimate:.6}",
        atlas.step_count(),
        atlas.final_scale(),
        result.atlas.total_distortion
    );
    if let Some(h) = hausdorff_to_truth {
        summary.push_str(&format!(", Hausdorff to truth {h:.4e}"));
    }
    if partial {
        summary = format!(
            "hypothesis violated (summability value {:.6e}); partial atlas written: {summary}",
            atlas.summability_value
        );
    }
    Ok(Outcome {
        report: path,
        extra: Vec::new(),
        summary,
        code: if partial { 4 } else { 0 },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PackReport {
    pub balls: usize,
    pub packing: PackingConfig,
    pub outcome: PackingReport,
}

pub fn pack(cfg: &RunConfig) -> CliResult<Outcome> {
    let balls = match (&cfg.input, &cfg.fixture) {
        (Some(path), _) => io::read_balls(path, cfg.dim)?,
        (None, Some(name)) => fixtures::family(name)?,
        (None, None) => return Err(CliError::Usage("either --input or --fixture is required".into())),
    };
    let n = balls[0].dim();
    let k = cfg.k.unwrap_or(1);
    cfg.check_dims(n, k)?;
    let family = BallFamily::new(balls, true)?;
    let mut pcfg = PackingConfig::new(n, k, cfg.delta.unwrap_or(0.1));
    if let Some(v) = cfg.eps_mass {
        pcfg.eps_mass = v;
    }
    if let Some(r) = cfg.r_min {
        pcfg.r_min = r;
    }
    if let Some(a) = cfg.alpha_min {
        pcfg.r_max = moments::dyadic_scale(a);
    }
    if !(pcfg.r_min > 0.0 && pcfg.r_min <= pcfg.r_max && pcfg.delta > 0.0 && pcfg.eps_mass > 0.0) {
        return Err(CliError::Usage("need 0 < r_min <= r_max and positive delta, eps_mass".into()));
    }
    let outcome = covering::discrete_reifenberg_verify(&family, &pcfg)?;
    let mut summary = format!(
        "hypothesis {}, packing sum {:.6e}",
        if outcome.hypothesis_ok { "holds" } else { "fails" },
        outcome.packing_sum
    );
    if let (Some(b), Some(s)) = (outcome.worst_ball, outcome.failure_scale) {
        summary.push_str(&format!("; worst ball {b} fails at scale {s}"));
    }
    let result = PackReport {
        balls: family.len(),
        packing: pcfg,
        outcome,
    };
    let path = cfg.report_path();
    report::write(&path, cfg, &result)?;
    Ok(Outcome {
        report: path,
        extra: Vec::new(),
        summary,
        code: 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumSummary {
    pub samples: usize,
    pub grid_points: usize,
    pub grid_step: f64,
    pub max_singular_distance: f64,
    pub approximate: bool,
    pub points_file: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverSummary {
    pub eta: f64,
    pub energy: f64,
    pub level_bound: usize,
    pub levels: Vec<CoverLevel>,
    pub terminated: bool,
    pub final_balls: usize,
    pub skipped: Vec<Vec<f64>>,
    pub refinement_bound: f64,
    pub good_content: f64,
    pub final_content: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratifyReport {
    pub field: &'static str,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub r: f64,
    pub stratum: StratumSummary,
    pub minkowski: MinkowskiProfile,
    pub cover: CoverSummary,
}

pub const COVER_ETA: f64 = 0.5;

/// `<stem>.stratum.csv` beside the report.
pub fn stratum_path(report: &Path) -> PathBuf {
    let stem = report.with_extension("");
    let stem = match stem.extension().and_then(|e| e.to_str()) {
        Some("stratify") => stem.with_extension(""),
        _ => stem,
    };
    let mut name = stem.into_os_string();
    name.push(".stratum.csv");
    PathBuf::from(name)
}

/// The stratum of a catalog field in `B_1(0)`, its Minkowski volumes at
/// `r, 2r, 4r, 8r` and the inductive cover.
pub fn stratify(cfg: &RunConfig) -> CliResult<Outcome> {
    let tag = cfg
        .fixture
        .as_deref()
        .ok_or_else(|| CliError::Usage("stratify needs --fixture with a field tag".into()))?;
    let n = cfg.dim.unwrap_or(3);
    let k = cfg.k.unwrap_or(0);
    cfg.check_dims(n, k)?;
    let field = EnergyField::from_tag(tag, n)?;
    let eps = cfg.epsilon.unwrap_or(0.05);
    let r = cfg.r_min.unwrap_or(1.0 / 64.0);
    let step = cfg.grid_step.unwrap_or(r);
    let domain = Ball::new(vec![0.0; n], 1.0)?;
    let scfg = StratumConfig::default();
    let stratum = harmonic::quantitative_stratum_in(&field, &domain, k, eps, r, step, &scfg)?;
    let radii: Vec<f64> = (0..4).map(|j| r * 2f64.powi(j)).filter(|&s| s < domain.radius).collect();
    let minkowski = harmonic::minkowski_profile(&field, &domain, k, eps, &radii, &scfg)?;
    let cover_cfg = CoverConfig {
        grid_step: Some(step),
        ..CoverConfig::default()
    };
    let cover = covering::inductive_cover(&field, &domain, k, eps, r, COVER_ETA, &cover_cfg)?;

    let path = cfg.report_path();
    let points_file = stratum_path(&path);
    io::write_measure(&points_file, &stratum.measure)?;
    let max_singular_distance = stratum
        .points
        .iter()
        .map(|p| field.singular_distance(p))
        .fold(0.0, f64::max);
    let terminated = cover.open_balls().iter().all(|b| b.kind != covering::BallKind::Good);
    let result = StratifyReport {
        field: field.tag(),
        n,
        k,
        eps,
        r,
        stratum: StratumSummary {
            samples: stratum.points.len(),
            grid_points: stratum.grid_points,
            grid_step: step,
            max_singular_distance,
            approximate: stratum.approximate,
            points_file: points_file.clone(),
        },
        cover: CoverSummary {
            eta: COVER_ETA,
            energy: cover.energy,
            level_bound: cover.level_bound,
            terminated,
            final_balls: cover.final_balls().count(),
            skipped: cover.skipped.clone(),
            refinement_bound: cover.refinement_bound,
            good_content: cover.good_content,
            final_content: cover.final_content,
            levels: cover.levels,
        },
        minkowski,
    };
    report::write(&path, cfg, &result)?;
    let summary = format!(
        "{} stratum samples (max distance to singular set {:.4e}), Minkowski slope {:.4}, cover {} levels",
        result.stratum.samples,
        max_singular_distance,
        result.minkowski.slope,
        result.cover.levels.len()
    );
    Ok(Outcome {
        report: path,
        extra: vec![points_file],
        summary,
        code: 0,
    })
}

