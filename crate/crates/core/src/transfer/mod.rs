//! Discretized transfer operators on the circle, grid `C^k` seminorms,
//! spectral-radius estimation, exponential time averages and the
//! Neumann-series invariant of a finite chain, and stationary densities of
//! one-dimensional switched flows.

mod flowop;
mod grid;
mod model;
mod neumann;
mod spectral;
mod switching;

pub use flowop::{
    apply_transfer_flow, gauss_legendre, transfer_exp_average, ExpAverageOperator, QuadOpts,
};
pub use grid::{ck_seminorm, difference_sups, GridFunction, PeriodicSpline};
pub use model::{apply_transfer, Branches, CircleMapModel, INVERSE_TOL};
pub use neumann::{eigen_invariant, neumann_invariant, random_chain, NeumannResult, NEUMANN_TOL};
pub use spectral::{probe, spectral_radius, SpectralEstimate, SpectralOpts, MIN_WINDOW};
pub use switching::{switching_invariant_density, SwitchingDensity, UNIFORM_MARGIN};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransferError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("inverse branch {branch} failed to converge at y = {y}")]
    BranchInversionFailure { y: f64, branch: usize },
    #[error("probe {probe} collapsed below 1e-300 at iteration {iteration}")]
    Underflow { probe: usize, iteration: usize },
    #[error("row {row} of Δ sums to {sum} >= 1")]
    NotSubstochastic { row: usize, sum: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
