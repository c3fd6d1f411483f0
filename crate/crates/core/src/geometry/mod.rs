//! State spaces, the vector-field catalog, and RK4 flows with their
//! variational equation.

mod field;
mod flow;
mod map;
mod space;

pub use field::{FieldConfig, FieldSpec, Profile, CC_INNER, CC_OUTER};
pub use flow::{
    flow, flow_lifted, flow_occupation, flow_point, rk4_joint, rk4_state, FlowResult,
    IntegratorOpts, JointState,
};
pub use map::{flow_map_as_function, MapHandle};
pub use space::{wrap_centered, wrap_unit, Point, Space, BOUNDARY_SAMPLES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("flow needs {steps} steps, above the cap of {cap}")]
    StepCountOverflow { steps: u64, cap: u64 },
    #[error("trajectory left the trapping box at t = {t} near {point:?}")]
    BoundaryExit { t: f64, point: [f64; 2] },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field {field} does not point strictly inward at {point:?}")]
    NotTrapping { field: usize, point: [f64; 2] },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("flow time {0} is not finite")]
    NonFiniteTime(f64),
}
