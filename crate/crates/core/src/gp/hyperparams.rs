use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel hyperparameters: per-dimension length scales, signal and noise variance.
///
/// The optimizer works on the raw vector
/// `[ln ℓ_1, …, ln ℓ_d, ln σ_f², ln σ_n²]`, so positivity holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct GpHyperparams<T> {
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
    pub noise_variance: T,
}

impl<T: Scalar> GpHyperparams<T> {
    pub fn new(lengthscales: Vec<T>, signal_variance: T, noise_variance: T) -> Result<Self> {
        let p = Self { lengthscales, signal_variance, noise_variance };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(dim: usize, lengthscale: T, signal_variance: T, noise_variance: T) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_variance, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn raw_len(&self) -> usize {
        self.dim() + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::Config("at least one length scale is required".into()));
        }
        if let Some(bad) = self.lengthscales.iter().find(|l| !(l.is_finite() && **l > T::zero())) {
            return Err(Error::Config(format!("length scale {bad} is not positive and finite")));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > T::zero()) {
            return Err(Error::Config(format!("signal variance {} must be positive", self.signal_variance)));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= T::zero()) {
            return Err(Error::Config(format!("noise variance {} must be non-negative", self.noise_variance)));
        }
        Ok(())
    }

    pub fn to_raw(&self) -> Vec<T> {
        self.lengthscales.iter().map(|l| l.ln()).chain([self.signal_variance.ln(), self.noise_variance.ln()]).collect()
    }

    /// Inverse of [`to_raw`](Self::to_raw). Panics if `raw` is shorter than 3.
    pub fn from_raw(raw: &[T]) -> Self {
        assert!(raw.len() >= 3, "raw vector needs at least one length scale");
        let d = raw.len() - 2;
        Self {
            lengthscales: raw[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: raw[d].exp(),
            noise_variance: raw[d + 1].exp(),
        }
    }

    pub fn mean_lengthscale(&self) -> T {
        let n = T::from_usize(self.dim()).unwrap();
        self.lengthscales.iter().copied().sum::<T>() / n
    }

    pub fn to_f64(&self) -> GpHyperparams<f64> {
        GpHyperparams {
            lengthscales: self.lengthscales.iter().map(|v| v.to_f64_lossy()).collect(),
            signal_variance: self.signal_variance.to_f64_lossy(),
            noise_variance: self.noise_variance.to_f64_lossy(),
        }
    }
}
