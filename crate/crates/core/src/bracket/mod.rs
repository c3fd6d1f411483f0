//! Lie-bracket families and weak bracket ranks, and grid approximations of
//! forward reachable sets and the accessible set.

mod family;
mod reach;

pub use family::{
    family_rank, lie_bracket, weak_bracket_rank, BracketFamily, BracketField, BracketRank,
    FD_STEP, MAX_GENERATION, RANK_TOL,
};
pub use reach::{
    count_components, gamma_estimate, reachable_set, spread_seeds, GammaEstimate, ReachableMask,
    CHAIN_STEPS,
};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BracketError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("bracket generation {0} is above the cap of 3")]
    GenerationTooHigh(usize),
    #[error("invalid fields: {0}")]
    InvalidFields(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
