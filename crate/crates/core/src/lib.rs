// `!(x > 0.0)` is used throughout so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod conic;
pub mod error;
pub mod formulation;
pub mod scenario;
pub mod selection;
pub mod signaling;
pub mod synthesis;
pub mod workflow;

pub use error::{Error, Result};
