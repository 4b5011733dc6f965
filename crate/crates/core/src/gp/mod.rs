//! Gaussian process kernels, exact inference and hyperpriors.

mod hyperparams;
pub mod kernel;
mod model;
pub mod prior;

pub use hyperparams::GpHyperparams;
pub use kernel::{cross_kernel, gram, kernel, kernel_matern52, kernel_rbf, KernelKind};
pub(crate) use model::objective_with_grad;
pub use model::{mll, mll_grad, posterior, Dataset, GpModel, MllBreakdown, PointPrediction};
pub use prior::{log_prior, DspConstants, Hyperprior};
