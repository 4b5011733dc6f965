//! Log-EI acquisition: candidate generation, Boltzmann start selection and
//! box-constrained multi-start ascent.

pub mod ei;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::squared_distance;
use crate::optim::{maximize, AscentConfig};
use crate::sampling::{assemble_candidates, best_indices, Origin};
use crate::GpModel;

pub use ei::{ei, log_ei, log_ei_with_grad, log_h, normal_cdf, normal_pdf};

/// Above this inverse temperature selection is a deterministic top-k.
pub const TOP_K_TEMPERATURE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcqConfig {
    /// `m`: the Sobol set has `2m` points and RAASP adds `2m` more.
    pub raw_samples: usize,
    pub num_starts: usize,
    pub max_acq_steps: usize,
    pub raasp_enabled: bool,
    pub boltzmann_temperature: f64,
    /// Projected-gradient stopping threshold of each ascent.
    pub grad_tol: f64,
    /// Share of observations used as RAASP centres.
    pub top_fraction: f64,
}

impl Default for AcqConfig {
    fn default() -> Self {
        Self {
            raw_samples: 256,
            num_starts: 5,
            max_acq_steps: 2000,
            raasp_enabled: true,
            boltzmann_temperature: 1.0,
            grad_tol: 1e-9,
            top_fraction: 0.05,
        }
    }
}

impl AcqConfig {
    pub fn total_candidates(&self) -> usize {
        if self.raasp_enabled {
            4 * self.raw_samples
        } else {
            2 * self.raw_samples
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.raw_samples == 0 || self.num_starts == 0 || self.max_acq_steps == 0 {
            return Err(Error::Config("acquisition counts must be at least 1".into()));
        }
        if self.num_starts > self.total_candidates() {
            return Err(Error::Config(format!(
                "{} starts requested from {} candidates",
                self.num_starts,
                self.total_candidates()
            )));
        }
        if !(self.boltzmann_temperature > 0.0) {
            return Err(Error::Config("Boltzmann temperature must be positive".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::Config("top fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start_point: Vec<f64>,
    pub end_point: Vec<f64>,
    pub start_value: f64,
    pub end_value: f64,
    pub travel_distance: f64,
    pub origin: Origin,
    pub gradient_steps_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcqOptReport {
    pub chosen_point: Vec<f64>,
    /// log-EI at the chosen point.
    pub chosen_value: f64,
    pub starts: Vec<StartRecord>,
    pub raasp_start_fraction: f64,
    /// Every candidate had log-EI = −∞; the point is the best raw candidate.
    pub degenerate: bool,
}

impl AcqOptReport {
    pub fn mean_travel_distance(&self) -> f64 {
        if self.starts.is_empty() {
            return 0.0;
        }
        self.starts.iter().map(|s| s.travel_distance).sum::<f64>() / self.starts.len() as f64
    }

    pub fn total_gradient_steps(&self) -> usize {
        self.starts.iter().map(|s| s.gradient_steps_used).sum()
    }
}

/// `k` distinct indices drawn without replacement with probability
/// proportional to `exp(η · zscore(values))` (Gumbel-top-k).
pub fn boltzmann_select<R: Rng + ?Sized>(values: &[f64], k: usize, eta: f64, rng: &mut R) -> Result<Vec<usize>> {
    let n = values.len();
    if k > n {
        return Err(Error::Config(format!("cannot select {k} of {n} candidates")));
    }
    if !(eta > 0.0) {
        return Err(Error::Config("Boltzmann temperature must be positive".into()));
    }
    let finite_min = values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let floor = if finite_min.is_finite() { finite_min } else { 0.0 };
    let v: Vec<f64> = values.iter().map(|x| if x.is_finite() { *x } else { floor }).collect();
    let mean = v.iter().sum::<f64>() / n.max(1) as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let z: Vec<f64> = v.iter().map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 }).collect();

    let mut idx: Vec<usize> = (0..n).collect();
    if eta > TOP_K_TEMPERATURE {
        idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    } else {
        let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel");
        let keys: Vec<f64> = z.iter().map(|zi| eta * zi + gumbel.sample(rng)).collect();
        idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    }
    idx.truncate(k);
    Ok(idx)
}

/// Log-EI value and input gradient of a conditioned model whose targets follow
/// the maximization convention.
pub fn log_ei_at(model: &GpModel, x: &[f64], best: f64) -> (f64, Vec<f64>) {
    let p = model.predict_with_grad(x);
    log_ei_with_grad(p.mean, p.variance, &p.d_mean, &p.d_variance, best)
}

/// Log-EI without gradient.
pub fn log_ei_value(model: &GpModel, x: &[f64], best: f64) -> f64 {
    let (m, v) = model.predict(x);
    log_ei(m, v.sqrt(), best)
}

/// Maximizes log-EI over `[0,1]^d`.
///
/// The model's targets are maximized (larger is better); `y⋆` is the largest
/// observed target and RAASP perturbs the top `top_fraction` of rows.
pub fn maximize_acq<R: Rng + ?Sized>(model: &GpModel, config: &AcqConfig, rng: &mut R) -> Result<AcqOptReport> {
    config.validate()?;
    let data = model.data();
    let d = data.dim();
    let best = data.y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let neg: Vec<f64> = data.y().iter().map(|v| -v).collect();
    let top = data.x().select_rows(&best_indices(&neg, config.top_fraction));
    let seed: u64 = rng.random();
    let batch = assemble_candidates(&top, config.raw_samples, d, config.raasp_enabled, seed)?;

    let values: Vec<f64> = batch.points.iter_rows().map(|x| log_ei_value(model, x, best)).collect();
    if values.iter().all(|v| *v == f64::NEG_INFINITY) {
        let means: Vec<f64> = batch.points.iter_rows().map(|x| model.predict(x).0).collect();
        let i = (0..means.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
        return Ok(AcqOptReport {
            chosen_point: batch.points.row(i).to_vec(),
            chosen_value: f64::NEG_INFINITY,
            starts: Vec::new(),
            raasp_start_fraction: 0.0,
            degenerate: true,
        });
    }

    let picks = boltzmann_select(&values, config.num_starts, config.boltzmann_temperature, rng)?;
    let ascent = AscentConfig { max_steps: config.max_acq_steps, grad_tol: config.grad_tol, ..AscentConfig::default() }
        .with_bounds(vec![0.0; d], vec![1.0; d]);

    let starts: Vec<StartRecord> = picks
        .par_iter()
        .map(|&i| {
            let x0 = batch.points.row(i).to_vec();
            let start_value = values[i];
            let res = maximize(
                |x: &[f64]| -> std::result::Result<(f64, Vec<f64>), ()> { Ok(log_ei_at(model, x, best)) },
                x0.clone(),
                &ascent,
                |_| {},
            )
            .expect("log-EI evaluation is infallible");
            // a start stuck at −∞ never moves
            let (end_point, end_value) =
                if res.value >= start_value { (res.x, res.value) } else { (x0.clone(), start_value) };
            StartRecord {
                travel_distance: squared_distance(&x0, &end_point).sqrt(),
                start_point: x0,
                end_point,
                start_value,
                end_value,
                origin: batch.origin[i],
                gradient_steps_used: res.steps,
            }
        })
        .collect();

    let mut chosen_point = batch.points.row(0).to_vec();
    let mut chosen_value = f64::NEG_INFINITY;
    for s in &starts {
        if s.end_value > chosen_value {
            chosen_value = s.end_value;
            chosen_point = s.end_point.clone();
        }
    }
    for (i, v) in values.iter().enumerate() {
        if *v > chosen_value {
            chosen_value = *v;
            chosen_point = batch.points.row(i).to_vec();
        }
    }
    let raasp = starts.iter().filter(|s| s.origin.is_raasp()).count();
    Ok(AcqOptReport {
        chosen_point,
        chosen_value,
        raasp_start_fraction: raasp as f64 / starts.len() as f64,
        starts,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng as ChaRng;
    use rand::SeedableRng;

    #[test]
    fn top_k_limit_and_full_selection() {
        let v = [0.1, 3.0, -1.0, 2.0, f64::NEG_INFINITY];
        let mut rng = ChaRng::seed_from_u64(0);
        assert_eq!(boltzmann_select(&v, 2, 1e7, &mut rng).unwrap(), vec![1, 3]);
        let mut all = boltzmann_select(&v, 5, 1.0, &mut rng).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert!(boltzmann_select(&v, 6, 1.0, &mut rng).is_err());
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let v: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let a = boltzmann_select(&v, 5, 1.0, &mut ChaRng::seed_from_u64(4)).unwrap();
        let b = boltzmann_select(&v, 5, 1.0, &mut ChaRng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(AcqConfig::default().validate().is_ok());
        let bad = AcqConfig { raw_samples: 1, num_starts: 3, raasp_enabled: false, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
