//! Lower and upper bounds for distributionally robust optimization under
//! second-order stochastic dominance constraints with Wasserstein balls.

// dense numerical kernels index several arrays in lockstep; `!(x >= 0.0)` rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod cli_io;
pub mod conic;
pub mod error;
pub mod lower_bound;
pub mod model;
pub mod oracle;
pub mod report;
pub mod upper_bound;

pub use error::{Error, Result};
