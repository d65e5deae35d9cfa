use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty support: no mass in ball centered at {center:?} with radius {radius}")]
    EmptySupport { center: Vec<f64>, radius: f64 },
    #[error("empty point set: distance undefined")]
    EmptySet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("direction vectors are nearly dependent (residual {residual:.3e})")]
    DependentDirections { residual: f64 },
    #[error("centers {first} and {second} are closer than the partition scale ({distance} < {scale})")]
    SeparationViolated {
        first: usize,
        second: usize,
        distance: f64,
        scale: f64,
    },
    #[error("balls {first} and {second} violate the disjointness precondition")]
    NotDisjoint { first: usize, second: usize },
    #[error("plane fit impossible at good ball centered at {center:?}, radius {radius}: mass {mass} below cutoff")]
    PlaneFitImpossible {
        center: Vec<f64>,
        radius: f64,
        mass: f64,
    },
    #[error("ball centered at {center:?} with radius {radius} lies outside the reconstructed region")]
    OutsideRoot { center: Vec<f64>, radius: f64 },
    #[error("energy infinite: |grad f|^2 is not integrable on this stencil")]
    EnergyInfinite,
    #[error("quadrature did not reach tolerance {tolerance:.1e} (last relative change {change:.3e})")]
    QuadratureFailure { tolerance: f64, change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
