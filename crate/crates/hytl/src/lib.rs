//! Robust timed observers and MTL-based discrimination for affine hybrid
//! automata.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abstraction;
pub mod bisim;
pub mod hybrid;
pub mod inference;
pub mod linalg;
pub mod mtl;
pub mod observer;
pub mod par;
pub mod pipeline;
pub mod pso;
pub mod scenario;
