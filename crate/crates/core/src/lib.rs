//! Volterra Cox-Ingersoll-Ross process: kernels, resolvents and Riccati
//! solvers, Euler simulation, drift estimators and Monte Carlo experiments.
// `!(x > 0.0)` is used on purpose: it also rejects NaN. Oracle constants keep
// all printed digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod conv;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod kernels;
pub mod quad;
pub mod simulate;
pub mod volterra;

pub use error::{Error, Result};
