// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cauchy;
pub mod coeffs;
pub mod dispersion;
pub mod eigen;
pub mod error;
pub mod frame;
pub mod pde;
pub mod waves;

pub use error::{Error, Result};
