// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod indices;
pub mod procsim;
pub mod rng;
pub mod singular;
pub mod symbol;

pub use error::{Error, Result};
