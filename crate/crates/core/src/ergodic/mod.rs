//! Expansion constants and rates, expansion-volume rates, Lyapunov spectra,
//! and periodic orbits with their Floquet exponents.

mod lyapunov;
mod orbits;
mod rates;

pub use lyapunov::{lyapunov_spectrum, LyapunovSpectrum, LYAPUNOV_WINDOWS};
pub use orbits::{
    ergplan_check, find_periodic_orbits, ErgplanReport, OrbitCandidate, OrbitKind, OrbitOpts,
    OrbitRecord,
};
pub use rates::{
    expansion_constant, expansion_profile, expansion_rate, expansion_volume_rate, singular_values,
    space_grid,
    ExpansionProfile, RateEstimate,
};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ErgodicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("tangent map is singular to machine precision at {point:?}")]
    Degenerate { point: Vec<f64> },
    #[error("candidate {seed:?} never crossed its section within t = {horizon}")]
    NoSectionCrossing { seed: Vec<f64>, horizon: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
