// `!(x > 0.0)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coin;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod growth;
pub mod halting;
pub mod mc;
pub mod quadrature;
pub mod tentative;
pub mod wiener;

pub use error::{Error, Result};
