// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod imaging;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod patching;
pub mod regularizer;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
