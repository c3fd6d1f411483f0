#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bracket;
pub mod density;
pub mod ergodic;
pub mod geometry;
pub mod pdmp;
pub mod rng;
pub mod scenario;
pub mod transfer;
