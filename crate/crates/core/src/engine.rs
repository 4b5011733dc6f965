//! The BO loop and its method presets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize_acq, AcqConfig};
use crate::benchmarks::Benchmark;
use crate::diagnostics::otsd::otsd;
use crate::error::{Error, Result};
use crate::fit::{fit, fit_warm, init_lengthscales, FitConfig, FitReport, InitScheme};
use crate::gp::{DspConstants, GpHyperparams, Hyperprior};
use crate::rng::{derive_seed, rng_for, stream};
use crate::sampling::sobol;
use crate::trace::{IterationRecord, Phase, RunMeta, RunStatus, RunTrace, TRACE_FORMAT_VERSION};
use crate::{Dataset, GpModel, Hyperparams, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodPreset {
    #[serde(rename = "MSR")]
    Msr,
    #[serde(rename = "MLE_scaled")]
    MleScaled,
    #[serde(rename = "MLE_ln2")]
    MleLn2,
    #[serde(rename = "DSP")]
    Dsp,
}

impl MethodPreset {
    pub const ALL: [MethodPreset; 4] =
        [MethodPreset::Msr, MethodPreset::MleScaled, MethodPreset::MleLn2, MethodPreset::Dsp];

    pub fn name(self) -> &'static str {
        match self {
            MethodPreset::Msr => "MSR",
            MethodPreset::MleScaled => "MLE_scaled",
            MethodPreset::MleLn2 => "MLE_ln2",
            MethodPreset::Dsp => "DSP",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`; expected MSR, MLE_scaled, MLE_ln2 or DSP")))
    }

    /// `(init scheme, uses the dimension-scaled prior, RAASP)`.
    pub fn settings(self) -> (InitScheme, bool, bool) {
        match self {
            MethodPreset::Msr => (InitScheme::ScaledSqrtD, false, true),
            MethodPreset::MleScaled => (InitScheme::ScaledSqrtD, false, false),
            MethodPreset::MleLn2 => (InitScheme::ConstantLn2, false, false),
            MethodPreset::Dsp => (InitScheme::PriorMode, true, true),
        }
    }

    pub fn method(self, dim: usize) -> MethodConfig {
        self.method_with(dim, DspConstants::shipped())
    }

    pub fn method_with(self, dim: usize, dsp: DspConstants) -> MethodConfig {
        let (scheme, dsp_prior, raasp) = self.settings();
        let prior = if dsp_prior { Hyperprior::dim_scaled_with(dim, dsp) } else { Hyperprior::None };
        MethodConfig {
            name: self.name().to_string(),
            fit: FitConfig { scheme, prior, ..FitConfig::default() },
            acq: AcqConfig { raasp_enabled: raasp, ..AcqConfig::default() },
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub acq: AcqConfig,
    /// Start each fit from the previous iteration's hyperparameters.
    #[serde(default)]
    pub warm_start: bool,
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.acq.validate()
    }
}

/// Zero-mean, unit-variance targets (population SD; unit SD when constant).
pub fn standardize(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    y.iter().map(|v| (v - mean) / sd).collect()
}

/// Dataset for the surrogate: standardized and negated so that larger is better.
pub fn surrogate_dataset(x: &Matrix, y: &[f64]) -> Result<Dataset> {
    Dataset::new(x.clone(), standardize(y).into_iter().map(|v| -v).collect())
}

struct Recorder<'a> {
    benchmark: &'a Benchmark,
    x: Matrix,
    y: Vec<f64>,
    records: Vec<IterationRecord>,
}

#[derive(Default)]
struct BoFields {
    mean_lengthscale: Option<f64>,
    max_lengthscale_grad: Option<f64>,
    vanished: Option<bool>,
    raasp_start_fraction: Option<f64>,
    mean_travel_distance: Option<f64>,
    acq_gradient_steps: Option<usize>,
    fit_fallback: bool,
    acq_degenerate: bool,
}

impl<'a> Recorder<'a> {
    fn new(benchmark: &'a Benchmark) -> Self {
        Self { benchmark, x: Matrix::zeros(0, benchmark.dim()), y: Vec::new(), records: Vec::new() }
    }

    fn observe(&mut self, query: Vec<f64>, phase: Phase, f: BoFields) -> Result<()> {
        let observed = self.benchmark.evaluate(&query)?;
        if !observed.is_finite() {
            return Err(Error::BenchmarkEvaluation {
                message: "non-finite objective value".into(),
                output: observed.to_string(),
            });
        }
        let incumbent = self.records.last().map_or(observed, |r| r.incumbent.min(observed));
        self.x.push_row(&query);
        self.y.push(observed);
        self.records.push(IterationRecord {
            iteration: self.records.len(),
            phase,
            query,
            observed,
            incumbent,
            mean_lengthscale: f.mean_lengthscale,
            max_lengthscale_grad: f.max_lengthscale_grad,
            vanished: f.vanished,
            raasp_start_fraction: f.raasp_start_fraction,
            mean_travel_distance: f.mean_travel_distance,
            acq_gradient_steps: f.acq_gradient_steps,
            otsd: 0.0,
            otsd_solver: crate::diagnostics::otsd::Solver::Exact,
            fit_fallback: f.fit_fallback,
            acq_degenerate: f.acq_degenerate,
        });
        Ok(())
    }

    fn finish(mut self, meta: RunMeta) -> RunTrace {
        let curve = otsd::<f64, _>(&self.x.to_vecs());
        for (r, (v, s)) in self.records.iter_mut().zip(curve.values.into_iter().zip(curve.solver)) {
            r.otsd = v;
            r.otsd_solver = s;
        }
        RunTrace { meta, records: self.records }
    }
}

fn meta(
    benchmark: &Benchmark,
    seed: u64,
    method: &str,
    doe_size: usize,
    budget: usize,
    config: serde_json::Value,
) -> RunMeta {
    RunMeta {
        format_version: TRACE_FORMAT_VERSION,
        benchmark_id: benchmark.id().to_string(),
        benchmark_formula: benchmark.formula().to_string(),
        dim: benchmark.dim(),
        seed,
        method: method.to_string(),
        doe_size,
        budget,
        status: RunStatus::Completed,
        config,
    }
}

fn unfitted_params(method: &MethodConfig, d: usize, seed: u64) -> Result<Hyperparams> {
    let mut rng = rng_for(seed, &[stream::FIT, u64::MAX]);
    let ls = init_lengthscales(method.fit.scheme, d, &method.fit.prior, &mut rng)?;
    let noise = method.fit.fixed_noise.unwrap_or(method.fit.init_noise_variance);
    GpHyperparams::new(ls, method.fit.init_signal_variance, noise)
}

/// One BO iteration's fit, acquisition and fields for the record.
fn propose(
    method: &MethodConfig,
    x: &Matrix,
    y: &[f64],
    previous: &mut Option<Hyperparams>,
    seed: u64,
    iteration: usize,
) -> Result<(Vec<f64>, BoFields)> {
    let d = x.cols();
    let train = surrogate_dataset(x, y)?;
    let mut fit_rng = rng_for(seed, &[stream::FIT, iteration as u64]);
    let outcome: Result<FitReport> = match (method.warm_start, previous.as_ref()) {
        (true, Some(p)) => fit_warm(&train, &method.fit, p, &mut fit_rng),
        _ => fit(&train, &method.fit, &mut fit_rng),
    };
    let mut fields = BoFields::default();
    let params = match outcome {
        Ok(rep) => {
            fields.max_lengthscale_grad = Some(rep.max_window_gradient);
            fields.vanished = Some(rep.vanished);
            rep.params
        }
        Err(_) => {
            fields.fit_fallback = true;
            match previous.clone() {
                Some(p) => p,
                None => unfitted_params(method, d, seed)?,
            }
        }
    };
    fields.mean_lengthscale = Some(params.mean_lengthscale());
    *previous = Some(params.clone());

    let mut acq_rng = rng_for(seed, &[stream::ACQ, iteration as u64]);
    let model = match GpModel::condition(train, params, method.fit.kernel) {
        Ok(m) => m,
        Err(_) => {
            fields.fit_fallback = true;
            fields.acq_degenerate = true;
            let q = (0..d).map(|_| acq_rng.random::<f64>()).collect();
            return Ok((q, fields));
        }
    };
    let report = maximize_acq(&model, &method.acq, &mut acq_rng)?;
    if !report.degenerate {
        fields.raasp_start_fraction = Some(report.raasp_start_fraction);
        fields.mean_travel_distance = Some(report.mean_travel_distance());
        fields.acq_gradient_steps = Some(report.total_gradient_steps());
    }
    fields.acq_degenerate = report.degenerate;
    let q = report.chosen_point.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok((q, fields))
}

/// Runs BO for `budget` total evaluations, the first `doe_size` of them from a
/// scrambled Sobol design.
///
/// A benchmark failure stops the run and returns the partial trace with an
/// aborted status; configuration errors are returned as `Err`.
pub fn run(
    benchmark: &Benchmark,
    method: &MethodConfig,
    budget: usize,
    doe_size: usize,
    seed: u64,
) -> Result<RunTrace> {
    method.validate()?;
    if doe_size == 0 || budget <= doe_size {
        return Err(Error::Config(format!("need budget > doe_size >= 1, got budget {budget}, doe_size {doe_size}")));
    }
    let d = benchmark.dim();
    let config = serde_json::to_value(method)?;
    let mut m = meta(benchmark, seed, &method.name, doe_size, budget, config);
    let mut rec = Recorder::new(benchmark);
    let doe = sobol(doe_size, d, derive_seed(seed, &[stream::DOE]));
    let mut previous = None;

    let status = (|| -> Result<()> {
        for row in doe.iter_rows() {
            rec.observe(row.to_vec(), Phase::Doe, BoFields::default())?;
        }
        for it in doe_size..budget {
            let (q, fields) = propose(method, &rec.x, &rec.y, &mut previous, seed, it)?;
            rec.observe(q, Phase::Bo, fields)?;
        }
        Ok(())
    })();
    match status {
        Ok(()) => {}
        Err(e @ (Error::BenchmarkEvaluation { .. } | Error::BenchmarkSingular { .. })) => {
            m.status = RunStatus::Aborted { message: e.to_string() };
        }
        Err(e) => return Err(e),
    }
    Ok(rec.finish(m))
}

/// Uniform i.i.d. queries with the same trace schema.
pub fn random_search(benchmark: &Benchmark, budget: usize, seed: u64) -> Result<RunTrace> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let d = benchmark.dim();
    let mut m = meta(benchmark, seed, "random_search", 0, budget, serde_json::Value::Null);
    let mut rec = Recorder::new(benchmark);
    let mut rng = rng_for(seed, &[stream::RANDOM_SEARCH]);
    for _ in 0..budget {
        let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        if let Err(e) = rec.observe(q, Phase::Random, BoFields::default()) {
            m.status = RunStatus::Aborted { message: e.to_string() };
            break;
        }
    }
    Ok(rec.finish(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_table() {
        let msr = MethodPreset::Msr.method(100);
        assert_eq!(msr.fit.scheme, InitScheme::ScaledSqrtD);
        assert!(msr.fit.prior.is_none() && msr.acq.raasp_enabled);
        let scaled = MethodPreset::MleScaled.method(100);
        assert!(scaled.fit.prior.is_none() && !scaled.acq.raasp_enabled);
        let ln2 = MethodPreset::MleLn2.method(100);
        assert_eq!(ln2.fit.scheme, InitScheme::ConstantLn2);
        assert!(!ln2.acq.raasp_enabled);
        let dsp = MethodPreset::Dsp.method(100);
        assert_eq!(dsp.fit.scheme, InitScheme::PriorMode);
        assert!(matches!(dsp.fit.prior, Hyperprior::DimScaledLogNormal { dim: 100, .. }));
        assert!(dsp.acq.raasp_enabled);
        assert_eq!(MethodPreset::parse("mle_LN2").unwrap(), MethodPreset::MleLn2);
        assert!(MethodPreset::parse("turbo").is_err());
    }

    #[test]
    fn standardize_is_affine_invariant() {
        let y = [1.0, 4.0, -2.0, 0.5];
        let z: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
        for (a, b) in standardize(&y).iter().zip(standardize(&z)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(standardize(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}
