//! Stochastic heat equations with Riesz-correlated multiplicative noise on
//! bounded domains.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod grid;
pub mod heatkernel;
pub mod measure;
pub mod noise;
pub mod parallel;
pub mod quadrature;
pub mod renewal;
pub mod simulate;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
