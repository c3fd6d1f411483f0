//! Switching-system PDMPs: characteristics, the embedded chain `P = KA`,
//! thinning simulation, occupation histograms and Monte Carlo estimators.

mod accumulate;
mod characteristics;
mod simulate;
mod transport;

pub use accumulate::{l1, HistGrid, OccupationAccumulator};
pub use characteristics::{
    Characteristics, RateEntry, RateFn, Rates, ALPHA_MARGIN, RATE_GRID, RATE_SAFETY,
};
pub use simulate::{
    embedded_step, invariant_measure_mc, k_pushforward, simulate_continuous, EmbeddedState,
    Estimator, EventKind, EventLog, McOpts, McResult, Sojourn, TrajectorySummary, SPLIT_TOL,
};
pub use transport::TransportSolution;

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdmpError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid characteristics: {0}")]
    InvalidCharacteristics(String),
    #[error("rate matrix is not irreducible")]
    Reducible,
    #[error("alpha = {alpha} does not exceed the rate bound {bound}")]
    AlphaTooSmall { alpha: f64, bound: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid histogram grid: {0}")]
    InvalidGrid(String),
    #[error("split-half L1 = {split_half_l1} exceeds {tol}")]
    NonConvergence { split_half_l1: f64, tol: f64 },
    #[error("i/o: {0}")]
    Io(String),
}
