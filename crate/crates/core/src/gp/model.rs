//! Exact GP conditioning: posterior, marginal log-likelihood and its gradient.

use serde::{Deserialize, Serialize};

use super::kernel::{inverse_squared, kernel_and_distances, scaled_sq_dist, KernelKind};
use super::prior::{log_prior, Hyperprior};
use super::GpHyperparams;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, dot, Cholesky, Matrix, JITTER_CEILING};
use crate::scalar::Scalar;

/// Observations inside the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Scalar"))]
pub struct Dataset<T> {
    x: Matrix<T>,
    y: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dataset(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if x.cols() == 0 {
            return Err(Error::Dataset("zero-dimensional inputs".into()));
        }
        for (i, row) in x.iter_rows().enumerate() {
            if let Some(v) = row.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                return Err(Error::Dataset(format!("row {i} leaves the unit cube ({v})")));
            }
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite target {v}")));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Same inputs with replaced targets.
    pub fn with_targets(&self, y: Vec<T>) -> Result<Self> {
        Self::new(self.x.clone(), y)
    }

    /// First `n` observations.
    pub fn prefix(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        Self { x: self.x.select_rows(&idx), y: self.y[..idx.len()].to_vec() }
    }
}

/// Three-term decomposition of the marginal log-likelihood.
///
/// `complexity_penalty` is the signed contribution `−½ ln|K + σ_n² I|`, so the
/// terms add up to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MllBreakdown<T> {
    pub data_fit: T,
    pub complexity_penalty: T,
    pub constant: T,
    pub total: T,
}

/// Posterior mean/variance at one point with input gradients.
#[derive(Debug, Clone)]
pub struct PointPrediction<T> {
    pub mean: T,
    pub variance: T,
    pub d_mean: Vec<T>,
    pub d_variance: Vec<T>,
}

/// A GP conditioned on a dataset for fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpModel<T> {
    data: Dataset<T>,
    params: GpHyperparams<T>,
    kind: KernelKind,
    inv_ls2: Vec<T>,
    chol: Cholesky<T>,
    alpha: Vec<T>,
    jitter: T,
    kernel: Matrix<T>,
    dist: Matrix<T>,
}

impl<T: Scalar> GpModel<T> {
    /// Factors `K + σ_n² I`, escalating jitter from `1e-8·σ_f²` up to `1e-4·σ_f²`.
    pub fn condition(data: Dataset<T>, params: GpHyperparams<T>, kind: KernelKind) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Dataset("cannot condition on zero observations".into()));
        }
        if data.dim() != params.dim() {
            return Err(Error::DimensionMismatch { expected: params.dim(), got: data.dim() });
        }
        let (kernel, dist) = kernel_and_distances(data.x(), &params, kind);
        let mut noisy = kernel.clone();
        for i in 0..data.len() {
            noisy[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = cholesky_with_jitter(&noisy, params.signal_variance)
            .ok_or(Error::SurrogateSingular { max_jitter: JITTER_CEILING * params.signal_variance.to_f64_lossy() })?;
        let alpha = chol.solve(data.y());
        let inv_ls2 = inverse_squared(&params.lengthscales);
        Ok(Self { data, params, kind, inv_ls2, chol, alpha, jitter, kernel, dist })
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn params(&self) -> &GpHyperparams<T> {
        &self.params
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Jitter that was added to the diagonal to make the factorization succeed.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    fn cross(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.data.len();
        let mut k = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for row in self.data.x().iter_rows() {
            let ri = scaled_sq_dist(x, row, &self.inv_ls2);
            r.push(ri);
            k.push(self.kind.value(ri, self.params.signal_variance));
        }
        (k, r)
    }

    /// Latent posterior mean and variance (variance clamped at zero).
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let (mut k, _) = self.cross(x);
        let mean = dot(&k, &self.alpha);
        self.chol.solve_lower_in_place(&mut k);
        let var = (self.params.signal_variance - dot(&k, &k)).max(T::zero());
        (mean, var)
    }

    /// Mean, variance and their gradients with respect to `x`.
    pub fn predict_with_grad(&self, x: &[T]) -> PointPrediction<T> {
        let d = x.len();
        let (k, r) = self.cross(x);
        let mean = dot(&k, &self.alpha);
        let mut v = k.clone();
        self.chol.solve_lower_in_place(&mut v);
        let raw_var = self.params.signal_variance - dot(&v, &v);
        let variance = raw_var.max(T::zero());
        // u = K⁻¹ k*
        self.chol.solve_upper_in_place(&mut v);
        let u = v;
        let two = T::of(2.0);
        let mut d_mean = vec![T::zero(); d];
        let mut d_variance = vec![T::zero(); d];
        for (a, row) in self.data.x().iter_rows().enumerate() {
            let dk_dr = self.kind.d_value_dr(r[a], self.params.signal_variance);
            // ∂k/∂x_i = k'(r) · 2 (x_i − x_ai) / ℓ_i²
            let wm = dk_dr * two * self.alpha[a];
            let wv = -dk_dr * two * two * u[a];
            for i in 0..d {
                let g = (x[i] - row[i]) * self.inv_ls2[i];
                d_mean[i] += wm * g;
                d_variance[i] += wv * g;
            }
        }
        if raw_var <= T::zero() {
            d_variance.iter_mut().for_each(|g| *g = T::zero());
        }
        PointPrediction { mean, variance, d_mean, d_variance }
    }

    /// Joint posterior over query rows.
    pub fn posterior(&self, xq: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        if xq.cols() != self.params.dim() {
            return Err(Error::DimensionMismatch { expected: self.params.dim(), got: xq.cols() });
        }
        let m = xq.rows();
        let mut means = Vec::with_capacity(m);
        let mut whitened: Vec<Vec<T>> = Vec::with_capacity(m);
        for q in xq.iter_rows() {
            let (mut k, _) = self.cross(q);
            means.push(dot(&k, &self.alpha));
            self.chol.solve_lower_in_place(&mut k);
            whitened.push(k);
        }
        let inv = &self.inv_ls2;
        let mut cov = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let prior = self.kind.value(scaled_sq_dist(xq.row(i), xq.row(j), inv), self.params.signal_variance);
                let c = prior - dot(&whitened[i], &whitened[j]);
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
            if cov[(i, i)] < T::zero() {
                cov[(i, i)] = T::zero();
            }
        }
        Ok((means, cov))
    }

    pub fn mll(&self) -> MllBreakdown<T> {
        let half = T::of(0.5);
        let n = T::from_usize(self.data.len()).unwrap();
        let data_fit = -half * dot(self.data.y(), &self.alpha);
        let complexity_penalty = -half * self.chol.log_det();
        let constant = -half * n * (T::of(2.0) * T::PI()).ln();
        MllBreakdown { data_fit, complexity_penalty, constant, total: data_fit + complexity_penalty + constant }
    }

    /// Gradient of the MLL over `[ln ℓ…, ln σ_f², ln σ_n²]`.
    ///
    /// Uses `∂/∂θ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)`.
    pub fn mll_grad(&self) -> Vec<T> {
        let n = self.data.len();
        let d = self.params.dim();
        let sf2 = self.params.signal_variance;
        let kinv = self.chol.inverse();
        let half = T::of(0.5);
        let mut grad = vec![T::zero(); d + 2];

        let mut acc = vec![T::zero(); d];
        let mut g_signal = T::zero();
        let mut trace_w = T::zero();
        for a in 0..n {
            let xa = self.data.x().row(a);
            let w_aa = self.alpha[a] * self.alpha[a] - kinv[(a, a)];
            trace_w += w_aa;
            g_signal += w_aa * self.kernel[(a, a)];
            for b in 0..a {
                let w_ab = self.alpha[a] * self.alpha[b] - kinv[(a, b)];
                g_signal += T::of(2.0) * w_ab * self.kernel[(a, b)];
                // both (a, b) and (b, a) contribute
                let m = T::of(2.0) * w_ab * self.kind.d_value_dr(self.dist[(a, b)], sf2);
                if m == T::zero() {
                    continue;
                }
                let xb = self.data.x().row(b);
                for i in 0..d {
                    let diff = xa[i] - xb[i];
                    acc[i] += m * diff * diff;
                }
            }
        }
        // ∂r/∂ln ℓ_i = −2 δ_i² / ℓ_i², times the ½ in front of the trace
        for i in 0..d {
            grad[i] = -acc[i] * self.inv_ls2[i];
        }
        grad[d] = half * g_signal;
        grad[d + 1] = half * self.params.noise_variance * trace_w;
        grad
    }

    /// Natural-space length-scale gradient `∂/∂ℓ_i = (∂/∂ln ℓ_i) / ℓ_i`.
    pub fn lengthscale_grad_natural(&self, raw_grad: &[T]) -> Vec<T> {
        raw_grad[..self.params.dim()].iter().zip(&self.params.lengthscales).map(|(g, l)| *g / *l).collect()
    }
}

pub fn posterior<T: Scalar>(
    train: &Dataset<T>,
    params: &GpHyperparams<T>,
    xq: &Matrix<T>,
    kind: KernelKind,
) -> Result<(Vec<T>, Matrix<T>)> {
    GpModel::condition(train.clone(), params.clone(), kind)?.posterior(xq)
}

pub fn mll<T: Scalar>(train: &Dataset<T>, params: &GpHyperparams<T>, kind: KernelKind) -> Result<MllBreakdown<T>> {
    Ok(GpModel::condition(train.clone(), params.clone(), kind)?.mll())
}

/// Value and raw-space gradient of `mll + log_prior`.
pub fn mll_grad<T: Scalar>(
    train: &Dataset<T>,
    params: &GpHyperparams<T>,
    prior: &Hyperprior,
    kind: KernelKind,
) -> Result<(T, Vec<T>)> {
    let model = GpModel::condition(train.clone(), params.clone(), kind)?;
    Ok(objective_with_grad(&model, prior))
}

pub(crate) fn objective_with_grad<T: Scalar>(model: &GpModel<T>, prior: &Hyperprior) -> (T, Vec<T>) {
    let mut grad = model.mll_grad();
    let mut value = model.mll().total;
    if !prior.is_none() {
        let (lp, lg) = log_prior(prior, model.params());
        value += lp;
        grad.iter_mut().zip(lg).for_each(|(g, l)| *g += l);
    }
    (value, grad)
}
