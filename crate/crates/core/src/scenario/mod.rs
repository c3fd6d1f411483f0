//! Declarative TOML scenarios, their runner, sweeps and on-disk reports.

mod config;
mod report;
mod run;
mod shipped;

pub use config::{
    AnchorSpec, CompareSpec, DensitySource, Experiment, MapConfig, McConfig, ProbeSpec,
    RatesConfig, Scenario, SweepSpec, SystemConfig, SWEEPABLE,
};
pub use report::{content_hash, Check, Metric, Outputs, RunReport, Status};
pub use run::{run, run_file, sweep, RunOpts, DEFAULT_OUT, OUT_ENV};
pub use shipped::{shipped, SHIPPED};

use crate::bracket::BracketError;
use crate::density::DensityError;
use crate::ergodic::ErgodicError;
use crate::geometry::GeometryError;
use crate::pdmp::PdmpError;
use crate::transfer::TransferError;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parameter `{param}` is not sweepable for experiment `{experiment}`")]
    UnknownParam { param: String, experiment: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pdmp(#[from] PdmpError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Ergodic(#[from] ErgodicError),
    #[error(transparent)]
    Bracket(#[from] BracketError),
}
