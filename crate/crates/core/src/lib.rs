//! Typical ranks of real 3-tensors and numerical certificates that a tensor
//! has rank equal to its middle dimension.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bilinear;
pub mod certify;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod hopf;
pub mod linalg;
pub mod pencil;
pub mod tensor;
pub mod trank;

pub use error::{Error, Result};
