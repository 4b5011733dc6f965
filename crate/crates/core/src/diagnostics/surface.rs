use serde::{Deserialize, Serialize};

use crate::acquisition::ei;
use crate::error::{Error, Result};
use crate::gp::{log_prior, GpHyperparams, Hyperprior, KernelKind};
use crate::rng::{derive_seed, stream};
use crate::sampling::sobol;
use crate::{Dataset, GpModel};

use super::heatmap::gp_sample_dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub kernel: KernelKind,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { signal_variance: 1.0, noise_variance: 1e-8, kernel: KernelKind::Matern52 }
    }
}

/// One isotropic length scale of the sweep; every term is divided by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lengthscale: f64,
    /// `−½ yᵀK⁻¹y / n`
    pub data_fit: f64,
    /// `+½ ln|K| / n`
    pub penalty: f64,
    /// Full MLL (constant included) over `n`.
    pub total: f64,
    pub total_with_prior: f64,
}

pub fn mll_surface(
    train: &Dataset,
    l_grid: &[f64],
    prior: &Hyperprior,
    cfg: &SurfaceConfig,
) -> Result<Vec<SurfacePoint>> {
    if train.is_empty() {
        return Err(Error::Dataset("MLL surface needs observations".into()));
    }
    let n = train.len() as f64;
    let d = train.dim();
    l_grid
        .iter()
        .map(|&l| {
            let params = GpHyperparams::isotropic(d, l, cfg.signal_variance, cfg.noise_variance);
            let b = GpModel::condition(train.clone(), params.clone(), cfg.kernel)?.mll();
            let lp = if prior.is_none() { 0.0 } else { log_prior(prior, &params).0 };
            Ok(SurfacePoint {
                lengthscale: l,
                data_fit: b.data_fit / n,
                penalty: -b.complexity_penalty / n,
                total: b.total / n,
                total_with_prior: (b.total + lp) / n,
            })
        })
        .collect()
}

/// `Σ |v[k+1] − v[k]|`.
pub fn total_variation(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// EI at each row of `points` (maximization form, `best` = largest target).
pub fn ei_values(model: &GpModel, points: &crate::Matrix) -> Vec<f64> {
    let best = model.data().y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    points
        .iter_rows()
        .map(|x| {
            let (m, v) = model.predict(x);
            ei(m, v.sqrt(), best)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EiHistogram {
    pub d: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Share of values in the fullest bin.
    pub modal_share: f64,
    pub values: Vec<f64>,
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into the
/// end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<usize>) {
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let k = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    (edges, counts)
}

/// Histograms of EI over `n_eval` Sobol points for a GP (isotropic RBF,
/// true hyperparameters, raw sample values maximized) conditioned on `n_obs`
/// uniform points of a prior sample, one per dimension. Bins span
/// `[0, max EI]` of each dimension.
pub fn ei_flatness_histogram(
    d_grid: &[usize],
    n_obs: usize,
    lengthscale: f64,
    n_eval: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<EiHistogram>> {
    if d_grid.is_empty() || bins == 0 || n_eval == 0 {
        return Err(Error::Config("EI histogram needs dimensions, bins and evaluation points".into()));
    }
    d_grid
        .iter()
        .map(|&d| {
            let s = derive_seed(seed, &[d as u64]);
            let data = gp_sample_dataset(d, n_obs, lengthscale, KernelKind::Rbf, s)?;
            let model = GpModel::condition(data, GpHyperparams::isotropic(d, lengthscale, 1.0, 1e-6), KernelKind::Rbf)?;
            let pts = sobol(n_eval, d, derive_seed(s, &[stream::ACQ]));
            let values = ei_values(&model, &pts);
            let hi = values.iter().copied().fold(0.0, f64::max);
            let (edges, counts) = histogram(&values, bins, 0.0, hi);
            let modal_share = *counts.iter().max().unwrap() as f64 / values.len() as f64;
            Ok(EiHistogram { d, edges, counts, modal_share, values })
        })
        .collect()
}
