//! Multiscale flatness of point clouds and the tools built on it.
//!
//! * [`moments`]: best-fit planes and the k-dimensional displacement `D^k`.
//! * [`reifenberg`]: the iterative parametrization by interpolated projections.
//! * [`covering`]: good/bad ball classification, Vitali covers and packing bounds.
//! * [`harmonic`]: closed-form harmonic maps, normalized energy and symmetry strata.

pub mod covering;
pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod linalg;
pub mod measure;
pub mod moments;
pub mod reifenberg;
pub mod spatial;

pub use error::{Error, Result};
pub use geometry::{grassmann_distance, hausdorff_distance, plane_distance, project, AffinePlane, Ball};
pub use measure::AtomicMeasure;
pub use moments::{DisplacementConfig, DyadicProfile, MomentSpectrum};
pub use spatial::SpatialIndex;
