//! Histogram densities on dyadic ladders, smoothness and blow-up
//! diagnostics, and support masks.

mod analysis;
mod estimate;
mod mask;

pub use analysis::{
    blowup_at, smoothness_probe, support_estimate, support_estimate_at, BlowupReport, Region,
    RegionBox, SmoothnessReport, SupportEstimate, Verdict, VerdictThresholds, BLOWUP_FACTOR,
};
pub use estimate::{estimate_density, EmpiricalDensity, Level};
pub use mask::BinMask;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DensityError {
    #[error("accumulator holds no weight")]
    EmptyAccumulator,
    #[error("invalid resolution ladder: {0}")]
    BadLadder(String),
    #[error("region selects no cells at {0} bins")]
    RegionEmpty(usize),
    #[error("difference order {0} is above 3")]
    OrderTooHigh(usize),
    #[error("mode {0} does not exist")]
    BadMode(usize),
    #[error("point {0:?} lies outside the grid")]
    OutsideGrid(Vec<f64>),
    #[error("support threshold {0} must be positive")]
    BadThreshold(f64),
    #[error("mask shapes differ: {0}")]
    MaskMismatch(String),
    #[error("i/o: {0}")]
    Io(String),
}
