//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] owns every tensor of one forward pass; [`Var`] is a copyable
//! handle into it. The operator set is exactly what the network and the
//! losses need, with NCHW layout for image tensors.

mod conv;
mod gradcheck;
mod graph;
mod params;
mod scalar;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Graph, Var};
pub use params::{Bindings, Param, ParamStore};
pub use scalar::Scalar;
