use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rectify_core::DisplacementConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Per-atom dyadic displacement profiles and the summability verdict.
    Beta,
    /// Best-fit plane and second-moment spectrum of the whole cloud.
    FitPlane,
    /// Multiscale reconstruction by interpolated projections.
    Reconstruct,
    /// Packing hypothesis and packing sum of a disjoint ball family.
    Pack,
    /// Quantitative stratum, Minkowski volumes and inductive cover of a field.
    Stratify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Beta => "beta",
            Command::FitPlane => "fit-plane",
            Command::Reconstruct => "reconstruct",
            Command::Pack => "pack",
            Command::Stratify => "stratify",
        }
    }
}

/// Everything a run depends on. The thread count is left out of reports
/// since it never changes their contents.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "rectify", version, about = "Multiscale flatness, reconstruction and stratification reports")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// CSV with one atom per row: n coordinates and an optional weight
    /// (for `pack`: n coordinates and a radius).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Report path; defaults to `<stem>.<command>.json` beside the input.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Ambient dimension n. Without it every column is a coordinate.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Intrinsic dimension k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Ratio between successive reconstruction scales (default 1/2).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Flatness threshold: summability and packing values must stay below `delta^2`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Mass cutoff: balls with less than `eps_mass r^k` have zero displacement.
    #[arg(long)]
    pub eps_mass: Option<f64>,
    /// Good-ball mass threshold as a multiple of `r^k`.
    #[arg(long)]
    pub gamma_good: Option<f64>,
    /// Coarsest dyadic exponent: scales start at `2^-alpha_min`.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_min: Option<i32>,
    /// Finest dyadic exponent.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_max: Option<i32>,
    /// Sample spacing of reconstruction charts or the stratum grid.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Symmetry tolerance for `stratify`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Smallest scale considered.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Built-in data set or field instead of `--input`.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Reference point cloud for the Hausdorff error of `reconstruct`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Seed for the noise of built-in fixtures.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all available cores when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input: None,
            output: None,
            dim: None,
            k: None,
            rho: None,
            delta: None,
            eps_mass: None,
            gamma_good: None,
            alpha_min: None,
            alpha_max: None,
            grid_step: None,
            epsilon: None,
            r_min: None,
            fixture: None,
            truth: None,
            seed: 0,
            threads: None,
        }
    }

    /// Checks `n <= 16` and `k < n` once the ambient dimension is known.
    pub fn check_dims(&self, n: usize, k: usize) -> CliResult<()> {
        if n == 0 || n > MAX_DIM {
            return Err(CliError::Usage(format!("ambient dimension must lie in 1..={MAX_DIM}, got {n}")));
        }
        if k >= n {
            return Err(CliError::Usage(format!("need k < n, got k = {k}, n = {n}")));
        }
        Ok(())
    }

    /// Defaults for `k` with the command-line overrides applied.
    pub fn displacement(&self, k: usize) -> CliResult<DisplacementConfig> {
        let mut cfg = DisplacementConfig::new(k);
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.eps_mass {
            cfg.eps_mass = v;
        }
        if let Some(v) = self.gamma_good {
            cfg.gamma_good = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Report path: `--output`, else `<stem>.<command>.json` next to the input
    /// or in the working directory for fixtures.
    pub fn report_path(&self) -> PathBuf {
        if let Some(p) = &self.output {
            return p.clone();
        }
        let stem = match (&self.input, &self.fixture) {
            (Some(p), _) => p.with_extension(""),
            (None, Some(f)) => PathBuf::from(f),
            (None, None) => PathBuf::from("rectify"),
        };
        let mut name = stem.into_os_string();
        name.push(format!(".{}.json", self.command.name()));
        PathBuf::from(name)
    }
}
