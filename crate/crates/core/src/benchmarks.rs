//! Objectives on the unit cube: synthetic test functions, lazily sampled GP
//! realizations, and a subprocess adapter.

use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{kernel::scaled_sq_dist, GpHyperparams, KernelKind};
use crate::linalg::{Cholesky, JITTER_CEILING, JITTER_FLOOR};
use crate::rng::Rng as ChaRng;
use crate::Matrix;

/// Declarative benchmark description, used in config files and as the CLI
/// registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkSpec {
    Levy {
        dim: usize,
    },
    Schwefel {
        dim: usize,
    },
    Griewank {
        dim: usize,
    },
    /// Sphere over the first half of the coordinates; the rest are ignored.
    HalfIgnored {
        dim: usize,
    },
    GpSample {
        dim: usize,
        lengthscale: f64,
        #[serde(default)]
        kernel: KernelKind,
        /// Fixed realization seed; when absent each run seed gets its own.
        #[serde(default)]
        seed: Option<u64>,
    },
    External {
        dim: usize,
        command: Vec<String>,
        lo: f64,
        hi: f64,
    },
}

impl BenchmarkSpec {
    pub fn dim(&self) -> usize {
        match self {
            BenchmarkSpec::Levy { dim }
            | BenchmarkSpec::Schwefel { dim }
            | BenchmarkSpec::Griewank { dim }
            | BenchmarkSpec::HalfIgnored { dim }
            | BenchmarkSpec::GpSample { dim, .. }
            | BenchmarkSpec::External { dim, .. } => *dim,
        }
    }

    /// Registry id, e.g. `griewank-100` or `gp_sample-100-l0.5`.
    pub fn id(&self) -> String {
        match self {
            BenchmarkSpec::Levy { dim } => format!("levy-{dim}"),
            BenchmarkSpec::Schwefel { dim } => format!("schwefel-{dim}"),
            BenchmarkSpec::Griewank { dim } => format!("griewank-{dim}"),
            BenchmarkSpec::HalfIgnored { dim } => format!("half_ignored-{dim}"),
            BenchmarkSpec::GpSample { dim, lengthscale, .. } => format!("gp_sample-{dim}-l{lengthscale}"),
            BenchmarkSpec::External { dim, .. } => format!("external-{dim}"),
        }
    }

    /// Parses `name:dim` (and `gp_sample:dim:lengthscale`).
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            Error::Config(format!("unknown benchmark id `{s}`; expected name:dim (levy, schwefel, griewank, half_ignored) or gp_sample:dim:lengthscale"))
        };
        let dim: usize = parts.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let spec = match (parts[0], parts.len()) {
            ("levy", 2) => BenchmarkSpec::Levy { dim },
            ("schwefel", 2) => BenchmarkSpec::Schwefel { dim },
            ("griewank", 2) => BenchmarkSpec::Griewank { dim },
            ("half_ignored", 2) => BenchmarkSpec::HalfIgnored { dim },
            ("gp_sample", 3) => {
                let lengthscale = parts[2].parse().map_err(|_| bad())?;
                BenchmarkSpec::GpSample { dim, lengthscale, kernel: KernelKind::Matern52, seed: None }
            }
            _ => return Err(bad()),
        };
        Ok(spec)
    }

    /// Instantiates the benchmark; `run_seed` seeds GP realizations without a
    /// fixed seed.
    pub fn build(&self, run_seed: u64) -> Result<Benchmark> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Config("benchmark dimension must be at least 1".into()));
        }
        let b = match self {
            BenchmarkSpec::Levy { .. } => levy(dim),
            BenchmarkSpec::Schwefel { .. } => schwefel(dim),
            BenchmarkSpec::Griewank { .. } => griewank(dim),
            BenchmarkSpec::HalfIgnored { .. } => half_ignored(dim),
            BenchmarkSpec::GpSample { lengthscale, kernel, seed, .. } => {
                gp_prior_sample(dim, *lengthscale, *kernel, seed.unwrap_or(run_seed))?
            }
            BenchmarkSpec::External { command, lo, hi, .. } => external(command.clone(), dim, *lo, *hi)?,
        };
        Ok(b)
    }
}

enum Objective {
    Levy,
    Schwefel,
    Griewank,
    HalfIgnored,
    GpSample(Box<Mutex<GpSampleState>>),
    External(Vec<String>),
}

pub struct Benchmark {
    id: String,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    noise_free: bool,
    re_evaluable: bool,
    formula: String,
    objective: Objective,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark").field("id", &self.id).field("dim", &self.dim).finish()
    }
}

/// `lo·(1 − u) + hi·u`, exact at both endpoints.
pub fn rescale(u: f64, lo: f64, hi: f64) -> f64 {
    lo * (1.0 - u) + hi * u
}

impl Benchmark {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn noise_free(&self) -> bool {
        self.noise_free
    }

    /// Whether arbitrary new points can be evaluated without changing the
    /// benchmark (false for lazily sampled GP realizations).
    pub fn re_evaluable(&self) -> bool {
        self.re_evaluable
    }

    pub fn formula(&self) -> &str {
        &self.formula
    }

    pub fn to_natural(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(u, (lo, hi))| rescale(*u, *lo, *hi)).collect()
    }

    /// Evaluates a unit-cube point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Dataset("query outside the unit hypercube".into()));
        }
        match &self.objective {
            Objective::GpSample(state) => state.lock().expect("benchmark state poisoned").query(x),
            _ => self.evaluate_natural(&self.to_natural(x)),
        }
    }

    /// Evaluates a point in natural coordinates. GP realizations have no natural
    /// scaling, so their natural coordinates are the unit cube.
    pub fn evaluate_natural(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        Ok(match &self.objective {
            Objective::Levy => levy_value(z),
            Objective::Schwefel => schwefel_value(z),
            Objective::Griewank => griewank_value(z),
            Objective::HalfIgnored => half_ignored_value(z),
            Objective::GpSample(state) => state.lock().expect("benchmark state poisoned").query(z)?,
            Objective::External(cmd) => run_external(cmd, z)?,
        })
    }
}

fn synthetic(id: String, dim: usize, lo: f64, hi: f64, formula: &str, objective: Objective) -> Benchmark {
    Benchmark {
        id,
        dim,
        bounds: vec![(lo, hi); dim],
        noise_free: true,
        re_evaluable: true,
        formula: formula.to_string(),
        objective,
    }
}

pub const LEVY_FORMULA: &str = "w_i = 1 + (x_i - 1)/4; f = sin^2(pi w_1) + sum_{i<d} (w_i - 1)^2 [1 + 10 sin^2(pi w_i + 1)] + (w_d - 1)^2 [1 + sin^2(2 pi w_d)]";
pub const SCHWEFEL_FORMULA: &str = "f = 418.9829 d - sum_i x_i sin(sqrt(|x_i|))";
pub const GRIEWANK_FORMULA: &str = "f = sum_i x_i^2/4000 - prod_i cos(x_i/sqrt(i)) + 1";
pub const HALF_IGNORED_FORMULA: &str = "f = sum_{i <= floor(d/2)} (x_i - 1)^2; remaining coordinates ignored";

pub fn levy(d: usize) -> Benchmark {
    synthetic(format!("levy-{d}"), d, -10.0, 10.0, LEVY_FORMULA, Objective::Levy)
}

pub fn schwefel(d: usize) -> Benchmark {
    synthetic(format!("schwefel-{d}"), d, -500.0, 500.0, SCHWEFEL_FORMULA, Objective::Schwefel)
}

pub fn griewank(d: usize) -> Benchmark {
    synthetic(format!("griewank-{d}"), d, -600.0, 600.0, GRIEWANK_FORMULA, Objective::Griewank)
}

/// Sphere centred at 1 over the first `⌊d/2⌋` coordinates in `[−5, 5]`; the
/// other coordinates have no effect.
pub fn half_ignored(d: usize) -> Benchmark {
    synthetic(format!("half_ignored-{d}"), d, -5.0, 5.0, HALF_IGNORED_FORMULA, Objective::HalfIgnored)
}

pub fn levy_value(x: &[f64]) -> f64 {
    use std::f64::consts::PI;
    let d = x.len();
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let mut f = (PI * w[0]).sin().powi(2);
    for wi in &w[..d - 1] {
        f += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
    }
    let wd = w[d - 1];
    f + (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2))
}

pub fn schwefel_value(x: &[f64]) -> f64 {
    418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

pub fn griewank_value(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v / 4000.0).sum();
    let p: f64 = x.iter().enumerate().map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos()).product();
    s - p + 1.0
}

pub fn half_ignored_value(x: &[f64]) -> f64 {
    x[..x.len() / 2].iter().map(|v| (v - 1.0).powi(2)).sum()
}

struct GpSampleState {
    params: GpHyperparams<f64>,
    kind: KernelKind,
    inv_ls2: Vec<f64>,
    points: Matrix,
    chol: Cholesky<f64>,
    /// Whitened draws: values = L·w.
    whitened: Vec<f64>,
    values: Vec<f64>,
    cache: HashMap<Vec<u64>, f64>,
    rng: ChaRng,
}

impl GpSampleState {
    fn query(&mut self, x: &[f64]) -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let sf2 = self.params.signal_variance;
        let cross: Vec<f64> =
            self.points.iter_rows().map(|row| self.kind.value(scaled_sq_dist(x, row, &self.inv_ls2), sf2)).collect();
        let mut rel = JITTER_FLOOR;
        let (l_row, l_nn) = loop {
            if let Some(ext) = self.chol.extend(&cross, sf2 * (1.0 + rel)) {
                break ext;
            }
            rel *= 10.0;
            if rel > JITTER_CEILING * (1.0 + 1e-9) {
                return Err(Error::BenchmarkSingular { query_index: self.values.len() });
            }
        };
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        let value = crate::linalg::dot(&l_row, &self.whitened) + l_nn * eps;
        self.whitened.push(eps);
        self.points.push_row(x);
        self.values.push(value);
        self.cache.insert(key, value);
        Ok(value)
    }
}

/// A single realization of a zero-mean GP prior with unit signal variance,
/// drawn lazily: each new query is sampled from the GP conditioned on all
/// earlier answers, and repeated queries return the cached value.
pub fn gp_prior_sample(d: usize, lengthscale: f64, kind: KernelKind, seed: u64) -> Result<Benchmark> {
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(Error::Config(format!("GP sample length scale {lengthscale} must be positive")));
    }
    let params = GpHyperparams::isotropic(d, lengthscale, 1.0, 0.0);
    let inv_ls2 = vec![1.0 / (lengthscale * lengthscale); d];
    let state = GpSampleState {
        params,
        kind,
        inv_ls2,
        points: Matrix::zeros(0, d),
        chol: Cholesky::factor(&Matrix::zeros(0, 0)).expect("empty factor"),
        whitened: Vec::new(),
        values: Vec::new(),
        cache: HashMap::new(),
        rng: ChaRng::seed_from_u64(seed),
    };
    Ok(Benchmark {
        id: format!("gp_sample-{d}-l{lengthscale}"),
        dim: d,
        bounds: vec![(0.0, 1.0); d],
        noise_free: true,
        re_evaluable: false,
        formula: format!(
            "zero-mean GP prior sample, {kind:?} kernel, lengthscale {lengthscale}, signal variance 1, seed {seed}"
        ),
        objective: Objective::GpSample(Box::new(Mutex::new(state))),
    })
}

/// Black box run as a subprocess per evaluation. The point (natural
/// coordinates, bounds `[lo, hi]` in every dimension) is written as one
/// whitespace-separated line to stdin; the first token of stdout is the value.
pub fn external(command: Vec<String>, d: usize, lo: f64, hi: f64) -> Result<Benchmark> {
    if command.is_empty() {
        return Err(Error::Config("external benchmark needs a command".into()));
    }
    if !(lo < hi) {
        return Err(Error::Config(format!("external bounds [{lo}, {hi}] are empty")));
    }
    Ok(Benchmark {
        id: format!("external-{d}"),
        dim: d,
        bounds: vec![(lo, hi); d],
        noise_free: true,
        re_evaluable: true,
        formula: format!("external command {command:?}"),
        objective: Objective::External(command),
    })
}

fn run_external(cmd: &[String], z: &[f64]) -> Result<f64> {
    let fail = |message: String, output: String| Error::BenchmarkEvaluation { message, output };
    let mut child = Command::new(&cmd[0])
        .args(&cmd[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("cannot start `{}`: {e}", cmd[0]), String::new()))?;
    let line = z.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
    if let Some(mut stdin) = child.stdin.take() {
        // a child that exits without reading stdin is reported through its status
        let _ = writeln!(stdin, "{line}");
    }
    let out = child.wait_with_output().map_err(|e| fail(format!("waiting for `{}`: {e}", cmd[0]), String::new()))?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let captured = format!("{stdout}{}", String::from_utf8_lossy(&out.stderr));
    if !out.status.success() {
        return Err(fail(format!("`{}` exited with {}", cmd[0], out.status), captured));
    }
    stdout
        .split_whitespace()
        .next()
        .and_then(|t| t.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or_else(|| fail("output is not a finite real".into(), captured))
}
