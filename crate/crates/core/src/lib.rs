// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod denoiser;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scenario;
pub mod special;
pub mod state_evolution;

pub use error::{Error, Result};
