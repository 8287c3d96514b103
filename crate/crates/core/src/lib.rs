// NaN-rejecting guards are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod corrector;
pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod lab;
pub mod spectral;

pub use error::{Error, Result};
