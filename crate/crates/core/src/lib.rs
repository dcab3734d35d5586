//! Numerical laboratory for L²-contraction of viscous shocks in scalar
//! viscous conservation laws.

// `!(x > 0.0)` is how validation rejects NaN along with the bad values;
// index loops are kept in stencils that touch several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod counterexample;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod grid;
pub mod ode;
pub mod profile;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
