//! Stationary ARD kernels written as functions of the scaled squared distance
//! `r = Σ (x_i − x'_i)² / ℓ_i²`.

use serde::{Deserialize, Serialize};

use super::GpHyperparams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Matern52,
    Rbf,
}

impl KernelKind {
    /// Kernel value at scaled squared distance `r`.
    #[inline]
    pub fn value<T: Scalar>(self, r: T, signal_variance: T) -> T {
        match self {
            KernelKind::Matern52 => {
                let s = (T::of(5.0) * r).sqrt();
                signal_variance * (T::one() + s + s * s / T::of(3.0)) * (-s).exp()
            }
            KernelKind::Rbf => signal_variance * (-r * T::of(0.5)).exp(),
        }
    }

    /// Derivative of the kernel value with respect to `r`; finite at `r = 0`.
    #[inline]
    pub fn d_value_dr<T: Scalar>(self, r: T, signal_variance: T) -> T {
        match self {
            KernelKind::Matern52 => {
                let s = (T::of(5.0) * r).sqrt();
                -signal_variance * T::of(5.0 / 6.0) * (T::one() + s) * (-s).exp()
            }
            KernelKind::Rbf => -T::of(0.5) * signal_variance * (-r * T::of(0.5)).exp(),
        }
    }
}

#[inline]
pub(crate) fn inverse_squared<T: Scalar>(lengthscales: &[T]) -> Vec<T> {
    lengthscales.iter().map(|l| T::one() / (*l * *l)).collect()
}

#[inline]
pub(crate) fn scaled_sq_dist<T: Scalar>(x: &[T], x2: &[T], inv_ls2: &[T]) -> T {
    let n = x.len().min(x2.len()).min(inv_ls2.len());
    let (x, x2, w) = (&x[..n], &x2[..n], &inv_ls2[..n]);
    let mut s = [T::zero(); 4];
    let split = n - n % 4;
    for c in (0..split).step_by(4) {
        for k in 0..4 {
            let d = x[c + k] - x2[c + k];
            s[k] += d * d * w[c + k];
        }
    }
    let mut acc = (s[0] + s[1]) + (s[2] + s[3]);
    for i in split..n {
        let d = x[i] - x2[i];
        acc += d * d * w[i];
    }
    acc
}

fn check_dims<T: Scalar>(x: &[T], x2: &[T], params: &GpHyperparams<T>) -> Result<()> {
    let d = params.dim();
    for got in [x.len(), x2.len()] {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    Ok(())
}

pub fn kernel<T: Scalar>(kind: KernelKind, x: &[T], x2: &[T], params: &GpHyperparams<T>) -> Result<T> {
    check_dims(x, x2, params)?;
    let r = scaled_sq_dist(x, x2, &inverse_squared(&params.lengthscales));
    Ok(kind.value(r, params.signal_variance))
}

/// ARD Matérn-5/2: `σ_f² (1 + √(5r) + 5r/3) exp(−√(5r))`.
pub fn kernel_matern52<T: Scalar>(x: &[T], x2: &[T], params: &GpHyperparams<T>) -> Result<T> {
    kernel(KernelKind::Matern52, x, x2, params)
}

/// ARD squared exponential: `σ_f² exp(−r/2)`.
pub fn kernel_rbf<T: Scalar>(x: &[T], x2: &[T], params: &GpHyperparams<T>) -> Result<T> {
    kernel(KernelKind::Rbf, x, x2, params)
}

/// Kernel matrix plus noise: `K(X, X) + σ_n² I`.
pub fn gram<T: Scalar>(x: &Matrix<T>, params: &GpHyperparams<T>, kind: KernelKind) -> Result<Matrix<T>> {
    if x.cols() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), got: x.cols() });
    }
    let (mut k, _) = kernel_and_distances(x, params, kind);
    for i in 0..x.rows() {
        k[(i, i)] += params.noise_variance;
    }
    Ok(k)
}

/// Noise-free kernel matrix and the matrix of scaled squared distances.
pub(crate) fn kernel_and_distances<T: Scalar>(
    x: &Matrix<T>,
    params: &GpHyperparams<T>,
    kind: KernelKind,
) -> (Matrix<T>, Matrix<T>) {
    let n = x.rows();
    let inv = inverse_squared(&params.lengthscales);
    let mut k = Matrix::zeros(n, n);
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let rij = scaled_sq_dist(x.row(i), x.row(j), &inv);
            let kij = kind.value(rij, params.signal_variance);
            k[(i, j)] = kij;
            k[(j, i)] = kij;
            r[(i, j)] = rij;
            r[(j, i)] = rij;
        }
    }
    (k, r)
}

/// Cross-covariance `K(A, B)`.
pub fn cross_kernel<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    params: &GpHyperparams<T>,
    kind: KernelKind,
) -> Result<Matrix<T>> {
    for got in [a.cols(), b.cols()] {
        if got != params.dim() {
            return Err(Error::DimensionMismatch { expected: params.dim(), got });
        }
    }
    let inv = inverse_squared(&params.lengthscales);
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            out[(i, j)] = kind.value(scaled_sq_dist(a.row(i), b.row(j), &inv), params.signal_variance);
        }
    }
    Ok(out)
}
