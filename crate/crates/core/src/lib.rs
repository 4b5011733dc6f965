//! Bayesian optimization in high-dimensional spaces, with the diagnostics that
//! explain when it fails: vanishing marginal-likelihood gradients, flat
//! acquisition surfaces, exploration measured by traveling-salesman distance,
//! and boundary-dimension analysis.
//!
//! The numerical core (`gp`, `optim`, `acquisition::ei`, `diagnostics::otsd`)
//! is generic over [`Scalar`] (`f32` or `f64`). Everything above it works in
//! double precision through the aliases below.

// Index loops read closer to the math, and `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod benchmarks;
pub mod diagnostics;
pub mod engine;
mod error;
pub mod fit;
pub mod gp;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod sampling;
mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::{Scalar, SINGLE_PRECISION_EPS};

/// Double-precision hyperparameters.
pub type Hyperparams = gp::GpHyperparams<f64>;
/// Double-precision dataset.
pub type Dataset = gp::Dataset<f64>;
/// Double-precision conditioned GP.
pub type GpModel = gp::GpModel<f64>;
/// Double-precision MLL decomposition.
pub type MllBreakdown = gp::MllBreakdown<f64>;
/// Double-precision dense matrix.
pub type Matrix = linalg::Matrix<f64>;
