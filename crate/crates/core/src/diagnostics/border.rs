use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::sampling::best_indices;
use crate::trace::RunTrace;

/// A unit-cube coordinate this close to 0 or 1 counts as on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimLabel {
    Dominant,
    Secondary,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BorderConfig {
    /// Share of each run's best observations inspected.
    pub top_fraction: f64,
    /// Random replacements per run when estimating the `f̄` values.
    pub replacements: usize,
    pub seed: u64,
}

impl Default for BorderConfig {
    fn default() -> Self {
        Self { top_fraction: 0.1, replacements: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let se = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderReport {
    pub labels: Vec<DimLabel>,
    pub dominant: usize,
    pub secondary: usize,
    pub unstable: usize,
    /// Runs in which each dimension was labelled secondary.
    pub secondary_runs: Vec<usize>,
    /// Boundary frequency per run and dimension.
    pub boundary_frequency: Vec<Vec<f64>>,
    /// Agreeing runs needed for a stable label.
    pub agreement_threshold: usize,
    pub runs: usize,
    pub replacements: usize,
    pub f_best: MeanSe,
    pub f_dominant: MeanSe,
    pub f_secondary: MeanSe,
    pub f_rand: MeanSe,
}

fn on_boundary(v: f64) -> bool {
    v <= BOUNDARY_TOLERANCE || v >= 1.0 - BOUNDARY_TOLERANCE
}

/// Labels each dimension from the boundary frequency of every run's top
/// points, then measures how much randomizing each group hurts the best points.
pub fn border_analysis(traces: &[RunTrace], benchmark: &Benchmark, cfg: &BorderConfig) -> Result<BorderReport> {
    if traces.len() < 2 {
        return Err(Error::Config(format!("border analysis needs at least 2 runs, got {}", traces.len())));
    }
    if !benchmark.re_evaluable() {
        return Err(Error::UnsupportedAnalysis(format!(
            "benchmark {} cannot be re-evaluated at new points",
            benchmark.id()
        )));
    }
    if cfg.replacements == 0 || !(cfg.top_fraction > 0.0 && cfg.top_fraction <= 1.0) {
        return Err(Error::Config("border analysis needs replacements >= 1 and top fraction in (0, 1]".into()));
    }
    let d = benchmark.dim();
    for t in traces {
        if t.records.is_empty() {
            return Err(Error::Config("border analysis got an empty trace".into()));
        }
        if t.records.iter().any(|r| r.query.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: t.records[0].query.len() });
        }
    }
    let runs = traces.len();
    let threshold = (8 * runs).div_ceil(15);

    let mut freq = Vec::with_capacity(runs);
    let mut secondary_runs = vec![0usize; d];
    for t in traces {
        let y: Vec<f64> = t.records.iter().map(|r| r.observed).collect();
        let top = best_indices(&y, cfg.top_fraction);
        let f: Vec<f64> = (0..d)
            .map(|i| top.iter().filter(|&&k| on_boundary(t.records[k].query[i])).count() as f64 / top.len() as f64)
            .collect();
        for i in 0..d {
            if f[i] > 0.5 {
                secondary_runs[i] += 1;
            }
        }
        freq.push(f);
    }
    let labels: Vec<DimLabel> = secondary_runs
        .iter()
        .map(|&s| {
            if s >= threshold {
                DimLabel::Secondary
            } else if runs - s >= threshold {
                DimLabel::Dominant
            } else {
                DimLabel::Unstable
            }
        })
        .collect();

    let mut rng = rng_for(cfg.seed, &[stream::REPLACEMENT]);
    let mut best_vals = Vec::new();
    let mut dom_vals = Vec::new();
    let mut sec_vals = Vec::new();
    let mut rand_vals = Vec::new();
    for t in traces {
        let best = best_indices(&t.records.iter().map(|r| r.observed).collect::<Vec<_>>(), 0.0)[0];
        let x = &t.records[best].query;
        best_vals.push(t.records[best].observed);
        for _ in 0..cfg.replacements {
            for (target, out) in [(DimLabel::Dominant, &mut dom_vals), (DimLabel::Secondary, &mut sec_vals)] {
                let mut z = x.clone();
                for i in 0..d {
                    if labels[i] == target {
                        z[i] = rng.random::<f64>();
                    }
                }
                out.push(benchmark.evaluate(&z)?);
            }
            let r: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            rand_vals.push(benchmark.evaluate(&r)?);
        }
    }
    let count = |l: DimLabel| labels.iter().filter(|x| **x == l).count();
    Ok(BorderReport {
        dominant: count(DimLabel::Dominant),
        secondary: count(DimLabel::Secondary),
        unstable: count(DimLabel::Unstable),
        labels,
        secondary_runs,
        boundary_frequency: freq,
        agreement_threshold: threshold,
        runs,
        replacements: cfg.replacements,
        f_best: MeanSe::of(&best_vals),
        f_dominant: MeanSe::of(&dom_vals),
        f_secondary: MeanSe::of(&sec_vals),
        f_rand: MeanSe::of(&rand_vals),
    })
}
