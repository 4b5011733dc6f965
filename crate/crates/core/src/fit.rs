//! Length-scale initialization and multi-start MLE / MAP fitting.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{objective_with_grad, GpHyperparams, GpModel, Hyperprior, KernelKind};
use crate::optim::{maximize, AscentConfig, Iterate};
use crate::rng::rng_for;
use crate::{Dataset, Hyperparams, SINGLE_PRECISION_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitScheme {
    /// ℓ₀ = ln 2 in every dimension.
    ConstantLn2,
    /// ℓ₀ = √d / 10 in every dimension.
    #[default]
    ScaledSqrtD,
    /// ℓ₀ = mode of the hyperprior.
    PriorMode,
    /// One independent hyperprior draw per dimension.
    PriorSample,
    ExplicitValue {
        value: f64,
    },
}

/// Raw-space box for the optimizer: `(lo, hi)` on ℓ, σ_f² and σ_n².
pub const LENGTHSCALE_RANGE: (f64, f64) = (1e-4, 1e4);
pub const SIGNAL_VARIANCE_RANGE: (f64, f64) = (1e-6, 1e6);
pub const NOISE_VARIANCE_RANGE: (f64, f64) = (1e-8, 1e6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub scheme: InitScheme,
    pub prior: Hyperprior,
    pub kernel: KernelKind,
    pub restarts: usize,
    pub max_steps: usize,
    /// Tolerance on the raw-gradient infinity norm.
    pub convergence_tolerance: f64,
    /// Relative objective-change stopping threshold; 0 disables it.
    pub objective_tolerance: f64,
    pub record_gradient_trace: bool,
    /// Number of leading iterates inspected for the vanished flag.
    pub vanish_window: usize,
    pub init_signal_variance: f64,
    pub init_noise_variance: f64,
    /// Keeps σ_n² fixed at this value instead of fitting it.
    pub fixed_noise: Option<f64>,
    /// Standard deviation of the raw-space perturbation for restarts ≥ 1.
    pub restart_perturbation: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            scheme: InitScheme::ScaledSqrtD,
            prior: Hyperprior::None,
            kernel: KernelKind::Matern52,
            restarts: 1,
            max_steps: 500,
            convergence_tolerance: 1e-8,
            objective_tolerance: 1e-9,
            record_gradient_trace: true,
            vanish_window: 50,
            init_signal_variance: 1.0,
            init_noise_variance: 1e-4,
            fixed_noise: None,
            restart_perturbation: 0.3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_steps == 0 {
            return Err(Error::Config("restarts and max_steps must be at least 1".into()));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::Config("convergence tolerance must be positive".into()));
        }
        self.prior.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: Hyperparams,
    pub final_objective: f64,
    pub initial_objective: f64,
    /// Per-iterate infinity norm of the natural-space length-scale gradient
    /// (entry 0 is the starting point). Empty unless recording was requested.
    pub gradient_trace: Vec<f64>,
    /// Largest gradient norm over the first `vanish_window` iterates.
    pub max_window_gradient: f64,
    pub vanished: bool,
    pub steps_taken: usize,
    pub restart_index: usize,
}

/// Initial length scales for a scheme. Deterministic except for `PriorSample`.
pub fn init_lengthscales<R: Rng + ?Sized>(
    scheme: InitScheme,
    d: usize,
    prior: &Hyperprior,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let v = match scheme {
        InitScheme::ConstantLn2 => vec![std::f64::consts::LN_2; d],
        InitScheme::ScaledSqrtD => vec![(d as f64).sqrt() / 10.0; d],
        InitScheme::ExplicitValue { value } => {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("explicit length scale {value} must be positive")));
            }
            vec![value; d]
        }
        InitScheme::PriorMode => {
            let mode = prior.mode().ok_or_else(|| {
                Error::Config(format!("prior-mode initialization needs a prior with a mode, got {prior:?}"))
            })?;
            vec![mode; d]
        }
        InitScheme::PriorSample => {
            if prior.is_none() {
                return Err(Error::Config("prior-sample initialization needs a hyperprior".into()));
            }
            (0..d).map(|_| prior.sample(rng)).collect::<Result<_>>()?
        }
    };
    Ok(v)
}

fn raw_bounds(d: usize, cfg: &FitConfig) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![LENGTHSCALE_RANGE.0.ln(); d];
    let mut hi = vec![LENGTHSCALE_RANGE.1.ln(); d];
    lo.push(SIGNAL_VARIANCE_RANGE.0.ln());
    hi.push(SIGNAL_VARIANCE_RANGE.1.ln());
    match cfg.fixed_noise {
        Some(v) => {
            lo.push(v.ln());
            hi.push(v.ln());
        }
        None => {
            lo.push(NOISE_VARIANCE_RANGE.0.ln());
            hi.push(NOISE_VARIANCE_RANGE.1.ln());
        }
    }
    (lo, hi)
}

fn objective(train: &Dataset, kind: KernelKind, prior: &Hyperprior, raw: &[f64]) -> Result<(f64, Vec<f64>)> {
    let params = GpHyperparams::from_raw(raw);
    let model = GpModel::condition(train.clone(), params, kind)?;
    Ok(objective_with_grad(&model, prior))
}

/// Infinity norm of `∂/∂ℓ_i = (∂/∂ln ℓ_i) / ℓ_i` over the length scales.
fn natural_lengthscale_grad_norm(raw: &[f64], grad: &[f64]) -> f64 {
    let d = raw.len() - 2;
    (0..d).map(|i| (grad[i] * (-raw[i]).exp()).abs()).fold(0.0, f64::max)
}

fn fit_once(train: &Dataset, cfg: &FitConfig, raw0: Vec<f64>, restart_index: usize) -> Result<FitReport> {
    let d = train.dim();
    let (lo, hi) = raw_bounds(d, cfg);
    let ascent = AscentConfig {
        max_steps: cfg.max_steps,
        grad_tol: cfg.convergence_tolerance,
        ftol: cfg.objective_tolerance,
        ..AscentConfig::default()
    }
    .with_bounds(lo, hi);

    let mut trace = Vec::new();
    let mut window_max = 0.0f64;
    let mut initial = f64::NAN;
    let result = maximize(
        |raw| objective(train, cfg.kernel, &cfg.prior, raw),
        raw0,
        &ascent,
        |it: &Iterate<'_, f64>| {
            if it.step == 0 {
                initial = it.value;
            }
            let g = natural_lengthscale_grad_norm(it.x, it.grad);
            if it.step < cfg.vanish_window {
                window_max = window_max.max(g);
            }
            if cfg.record_gradient_trace {
                trace.push(g);
            }
        },
    )?;
    Ok(FitReport {
        params: GpHyperparams::from_raw(&result.x),
        final_objective: result.value,
        initial_objective: initial,
        gradient_trace: trace,
        max_window_gradient: window_max,
        vanished: window_max < SINGLE_PRECISION_EPS,
        steps_taken: result.steps,
        restart_index,
    })
}

/// Multi-start maximization of the MLL (or MLL + log prior).
///
/// Restart 0 starts from the configured scheme; later restarts perturb that
/// raw vector with Gaussian noise. The best restart wins, ties going to the
/// lowest index.
pub fn fit<R: Rng + ?Sized>(train: &Dataset, config: &FitConfig, rng: &mut R) -> Result<FitReport> {
    fit_impl(train, config, None, rng)
}

/// As [`fit`], but restart 0 starts from `start` instead of the init scheme.
pub fn fit_warm<R: Rng + ?Sized>(
    train: &Dataset,
    config: &FitConfig,
    start: &Hyperparams,
    rng: &mut R,
) -> Result<FitReport> {
    if start.dim() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), got: start.dim() });
    }
    fit_impl(train, config, Some(start), rng)
}

fn fit_impl<R: Rng + ?Sized>(
    train: &Dataset,
    config: &FitConfig,
    start: Option<&Hyperparams>,
    rng: &mut R,
) -> Result<FitReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Dataset("cannot fit on zero observations".into()));
    }
    let d = train.dim();
    let base_seed: u64 = rng.random();
    let noise0 = config.fixed_noise.unwrap_or(config.init_noise_variance);
    let (lo, hi) = raw_bounds(d, config);

    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|r| -> Result<Vec<f64>> {
            let mut restart_rng = rng_for(base_seed, &[r as u64]);
            let mut raw = match start {
                Some(p) => p.to_raw(),
                None => {
                    let ls = init_lengthscales(config.scheme, d, &config.prior, &mut restart_rng)?;
                    let mut raw = GpHyperparams::isotropic(d, 1.0, config.init_signal_variance, noise0).to_raw();
                    raw[..d].iter_mut().zip(&ls).for_each(|(r, l)| *r = l.ln());
                    raw
                }
            };
            if r > 0 {
                let normal = Normal::new(0.0, config.restart_perturbation).expect("valid perturbation");
                raw.iter_mut().for_each(|v| *v += normal.sample(&mut restart_rng));
            }
            raw.iter_mut().zip(lo.iter().zip(&hi)).for_each(|(v, (l, h))| *v = v.clamp(*l, *h));
            Ok(raw)
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<Result<FitReport>> =
        starts.into_par_iter().enumerate().map(|(i, raw0)| fit_once(train, config, raw0, i)).collect();

    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for outcome in outcomes {
        match outcome {
            Ok(rep) => {
                if best.as_ref().is_none_or(|b| rep.final_objective > b.final_objective) {
                    best = Some(rep);
                }
            }
            Err(e) => last_err = Some(e.to_string()),
        }
    }
    best.ok_or_else(|| Error::FitFailure {
        restarts: config.restarts,
        last: last_err.unwrap_or_else(|| "no restart ran".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng as ChaRng;
    use crate::Matrix;
    use rand::SeedableRng;

    #[test]
    fn scaled_init_is_one_at_d100() {
        let mut rng = ChaRng::seed_from_u64(0);
        let v = init_lengthscales(InitScheme::ScaledSqrtD, 100, &Hyperprior::None, &mut rng).unwrap();
        assert!(v.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn ln2_and_gamma_mode() {
        let mut rng = ChaRng::seed_from_u64(0);
        let v = init_lengthscales(InitScheme::ConstantLn2, 5, &Hyperprior::None, &mut rng).unwrap();
        assert!(v.iter().all(|x| (x - std::f64::consts::LN_2).abs() < 1e-16));
        let v = init_lengthscales(InitScheme::PriorMode, 3, &Hyperprior::gamma_3_6(), &mut rng).unwrap();
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn prior_schemes_need_a_prior() {
        let mut rng = ChaRng::seed_from_u64(0);
        assert!(init_lengthscales(InitScheme::PriorMode, 3, &Hyperprior::None, &mut rng).is_err());
        assert!(init_lengthscales(InitScheme::PriorSample, 3, &Hyperprior::None, &mut rng).is_err());
        assert!(init_lengthscales(InitScheme::ExplicitValue { value: -1.0 }, 3, &Hyperprior::None, &mut rng).is_err());
    }

    #[test]
    fn prior_sample_draws_positive_values() {
        let mut rng = ChaRng::seed_from_u64(9);
        let v = init_lengthscales(InitScheme::PriorSample, 50, &Hyperprior::uniform_box(1e-3, 30.0), &mut rng).unwrap();
        assert!(v.iter().all(|x| *x > 1e-3 && *x < 30.0));
        assert!(v.windows(2).any(|w| w[0] != w[1]));
    }

    fn toy() -> Dataset {
        let xs: [[f64; 2]; 6] = [[0.1, 0.2], [0.4, 0.9], [0.7, 0.3], [0.9, 0.8], [0.2, 0.6], [0.55, 0.5]];
        let y = xs.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect::<Vec<_>>();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        Dataset::new(Matrix::from_rows(&xs, 2), y.iter().map(|v| v - mean).collect()).unwrap()
    }

    #[test]
    fn restarts_only_improve_and_are_deterministic() {
        let cfg = FitConfig { restarts: 4, ..Default::default() };
        let a = fit(&toy(), &cfg, &mut ChaRng::seed_from_u64(5)).unwrap();
        let b = fit(&toy(), &cfg, &mut ChaRng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.final_objective >= a.initial_objective);
        let single = fit(&toy(), &FitConfig { restarts: 1, ..cfg.clone() }, &mut ChaRng::seed_from_u64(5)).unwrap();
        assert!(a.final_objective >= single.final_objective - 1e-12);
    }

    #[test]
    fn fixed_noise_stays_fixed() {
        let cfg = FitConfig { fixed_noise: Some(1e-3), ..Default::default() };
        let r = fit(&toy(), &cfg, &mut ChaRng::seed_from_u64(1)).unwrap();
        assert!((r.params.noise_variance - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_restarts_rejected() {
        let cfg = FitConfig { restarts: 0, ..Default::default() };
        assert!(matches!(fit(&toy(), &cfg, &mut ChaRng::seed_from_u64(1)), Err(Error::Config(_))));
    }
}
