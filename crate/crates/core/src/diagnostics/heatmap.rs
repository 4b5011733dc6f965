use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_acq, AcqConfig, AcqOptReport};
use crate::benchmarks::gp_prior_sample;
use crate::engine::{standardize, surrogate_dataset};
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, InitScheme};
use crate::gp::{GpHyperparams, Hyperprior, KernelKind};
use crate::rng::{derive_seed, rng_for, stream};
use crate::{Dataset, GpModel, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatKind {
    MaxGrad,
    MeanTravel,
    RaaspFraction,
}

impl StatKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatKind::MaxGrad => "max-grad",
            StatKind::MeanTravel => "mean-travel",
            StatKind::RaaspFraction => "raasp-fraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub d: usize,
    pub lengthscale: f64,
    pub mean: f64,
    pub per_rep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub kind: StatKind,
    pub d_grid: Vec<usize>,
    pub lengthscale_grid: Vec<f64>,
    pub reps: usize,
    /// Row-major over `(d, lengthscale)`.
    pub cells: Vec<HeatmapCell>,
}

impl HeatmapResult {
    pub fn cell(&self, d_index: usize, l_index: usize) -> &HeatmapCell {
        &self.cells[d_index * self.lengthscale_grid.len() + l_index]
    }

    /// Columns `d, lengthscale, statistic, mean, rep_0, …`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["d".to_string(), "lengthscale".into(), "statistic".into(), "mean".into()];
        header.extend((0..self.reps).map(|r| format!("rep_{r}")));
        w.write_record(&header)?;
        for c in &self.cells {
            let mut row =
                vec![c.d.to_string(), c.lengthscale.to_string(), self.kind.as_str().to_string(), c.mean.to_string()];
            row.extend(c.per_rep.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub fn default_d_grid() -> Vec<usize> {
    vec![2, 10, 50, 100, 500, 1000]
}

/// `points` log-spaced length scales from 0.05 to `√max_d`.
pub fn default_lengthscale_grid(max_d: usize, points: usize) -> Vec<f64> {
    let (lo, hi) = (0.05f64.ln(), (max_d as f64).sqrt().ln());
    if points <= 1 {
        return vec![0.05];
    }
    (0..points).map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp()).collect()
}

/// `n` uniform points labelled by one GP prior realization (unit signal
/// variance). Targets are the raw sample values.
pub fn gp_sample_dataset(d: usize, n: usize, lengthscale: f64, kind: KernelKind, seed: u64) -> Result<Dataset> {
    let bench = gp_prior_sample(d, lengthscale, kind, derive_seed(seed, &[stream::BENCHMARK]))?;
    let mut rng = rng_for(seed, &[stream::DATA]);
    let mut x = Matrix::zeros(0, d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        y.push(bench.evaluate(&q)?);
        x.push_row(&q);
    }
    Dataset::new(x, y)
}

fn validate_grids(d_grid: &[usize], l_grid: &[f64], reps: usize) -> Result<()> {
    if d_grid.is_empty() || l_grid.is_empty() || reps == 0 {
        return Err(Error::Config("heatmap grids must be nonempty and reps at least 1".into()));
    }
    if d_grid.contains(&0) || l_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Config("grid dimensions and length scales must be positive".into()));
    }
    Ok(())
}

fn assemble(kind: StatKind, d_grid: &[usize], l_grid: &[f64], reps: usize, values: Vec<Vec<f64>>) -> HeatmapResult {
    let cells = d_grid
        .iter()
        .flat_map(|d| l_grid.iter().map(move |l| (*d, *l)))
        .zip(values)
        .map(|((d, lengthscale), per_rep)| HeatmapCell {
            d,
            lengthscale,
            mean: per_rep.iter().sum::<f64>() / per_rep.len() as f64,
            per_rep,
        })
        .collect();
    HeatmapResult { kind, d_grid: d_grid.to_vec(), lengthscale_grid: l_grid.to_vec(), reps, cells }
}

/// Largest natural-space length-scale gradient over the first `steps`
/// iterates of an MLE fit started at `init_lengthscale`.
pub fn max_grad_cell(data: &Dataset, init_lengthscale: f64, steps: usize) -> Result<f64> {
    let train = data.with_targets(standardize(data.y()))?;
    let cfg = FitConfig {
        scheme: InitScheme::ExplicitValue { value: init_lengthscale },
        prior: Hyperprior::None,
        restarts: 1,
        max_steps: steps,
        vanish_window: steps,
        record_gradient_trace: false,
        objective_tolerance: 0.0,
        ..FitConfig::default()
    };
    Ok(fit(&train, &cfg, &mut rng_for(0, &[stream::FIT]))?.max_window_gradient)
}

/// Fig.-1-style heatmap: one GP-sample dataset per `(d, rep)`, shared by every
/// initial length scale.
pub fn vanishing_grad_heatmap(
    d_grid: &[usize],
    init_grid: &[f64],
    n_obs: usize,
    true_lengthscale: f64,
    steps: usize,
    reps: usize,
    seed: u64,
) -> Result<HeatmapResult> {
    validate_grids(d_grid, init_grid, reps)?;
    let jobs: Vec<(usize, usize)> = d_grid.iter().flat_map(|d| (0..reps).map(move |r| (*d, r))).collect();
    let per_job: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(d, r)| {
            let data = gp_sample_dataset(
                d,
                n_obs,
                true_lengthscale,
                KernelKind::Matern52,
                derive_seed(seed, &[d as u64, r as u64]),
            )?;
            init_grid.iter().map(|l| max_grad_cell(&data, *l, steps)).collect()
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::new();
    for (di, _) in d_grid.iter().enumerate() {
        for li in 0..init_grid.len() {
            values.push((0..reps).map(|r| per_job[di * reps + r][li]).collect());
        }
    }
    Ok(assemble(StatKind::MaxGrad, d_grid, init_grid, reps, values))
}

/// Acquisition maximization on a GP conditioned (with its true hyperparameters)
/// on `n_obs` uniform points of a GP prior sample.
pub fn acq_cell(d: usize, lengthscale: f64, n_obs: usize, acq: &AcqConfig, seed: u64) -> Result<AcqOptReport> {
    let data = gp_sample_dataset(d, n_obs, lengthscale, KernelKind::Matern52, seed)?;
    let train = surrogate_dataset(data.x(), data.y())?;
    let params = GpHyperparams::isotropic(d, lengthscale, 1.0, 1e-6);
    let model = GpModel::condition(train, params, KernelKind::Matern52)?;
    maximize_acq(&model, acq, &mut rng_for(seed, &[stream::ACQ]))
}

fn acq_heatmap(
    kind: StatKind,
    d_grid: &[usize],
    l_grid: &[f64],
    n_obs: usize,
    raasp: bool,
    reps: usize,
    seed: u64,
) -> Result<HeatmapResult> {
    validate_grids(d_grid, l_grid, reps)?;
    let acq = AcqConfig { raasp_enabled: raasp, ..AcqConfig::default() };
    let jobs: Vec<(usize, f64, usize)> =
        d_grid.iter().flat_map(|d| l_grid.iter().flat_map(move |l| (0..reps).map(move |r| (*d, *l, r)))).collect();
    let flat: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, l, r)| {
            let rep = acq_cell(d, l, n_obs, &acq, derive_seed(seed, &[d as u64, r as u64]))?;
            Ok(match kind {
                StatKind::RaaspFraction => rep.raasp_start_fraction,
                _ => rep.mean_travel_distance() / (d as f64).sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    let values = flat.chunks(reps).map(|c| c.to_vec()).collect();
    Ok(assemble(kind, d_grid, l_grid, reps, values))
}

/// Mean `d^(-1/2)`-normalized travel distance of the ascent starts.
pub fn acq_travel_heatmap(
    d_grid: &[usize],
    l_grid: &[f64],
    n_obs: usize,
    raasp: bool,
    reps: usize,
    seed: u64,
) -> Result<HeatmapResult> {
    acq_heatmap(StatKind::MeanTravel, d_grid, l_grid, n_obs, raasp, reps, seed)
}

/// Mean share of ascent starts that came from RAASP candidates.
pub fn raasp_fraction_heatmap(
    d_grid: &[usize],
    l_grid: &[f64],
    n_obs: usize,
    reps: usize,
    seed: u64,
) -> Result<HeatmapResult> {
    acq_heatmap(StatKind::RaaspFraction, d_grid, l_grid, n_obs, true, reps, seed)
}
