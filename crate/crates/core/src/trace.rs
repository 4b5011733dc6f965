//! Run traces and their JSON-lines / CSV persistence.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::otsd::Solver;
use crate::error::{Error, Result};

/// Trace schema version written into every header.
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Doe,
    Bo,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub benchmark_id: String,
    pub benchmark_formula: String,
    pub dim: usize,
    pub seed: u64,
    /// Preset name, `random_search`, or a custom method name.
    pub method: String,
    pub doe_size: usize,
    pub budget: usize,
    pub status: RunStatus,
    /// Resolved method configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// Unit-cube query point.
    pub query: Vec<f64>,
    pub observed: f64,
    /// Best observed value so far (minimization).
    pub incumbent: f64,
    pub mean_lengthscale: Option<f64>,
    /// Largest natural-space length-scale gradient over the fit's first steps.
    pub max_lengthscale_grad: Option<f64>,
    pub vanished: Option<bool>,
    pub raasp_start_fraction: Option<f64>,
    pub mean_travel_distance: Option<f64>,
    pub acq_gradient_steps: Option<usize>,
    pub otsd: f64,
    pub otsd_solver: Solver,
    pub fit_fallback: bool,
    pub acq_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub records: Vec<IterationRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(RunMeta),
    Iteration(IterationRecord),
}

/// Column order of the CSV export.
pub const CSV_COLUMNS: [&str; 14] = [
    "iteration",
    "phase",
    "observed",
    "incumbent",
    "mean_lengthscale",
    "max_lengthscale_grad",
    "vanished",
    "raasp_start_fraction",
    "mean_travel_distance",
    "acq_gradient_steps",
    "otsd",
    "otsd_solver",
    "fit_fallback",
    "acq_degenerate",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunTrace {
    pub fn is_completed(&self) -> bool {
        self.meta.status == RunStatus::Completed
    }

    pub fn final_incumbent(&self) -> Option<f64> {
        self.records.last().map(|r| r.incumbent)
    }

    pub fn final_otsd(&self) -> Option<f64> {
        self.records.last().map(|r| r.otsd)
    }

    pub fn queries(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.query.clone()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Header(self.meta.clone())).expect("serializable header");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&Line::Iteration(r.clone())).expect("serializable record"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::TraceFormat { path: path.display().to_string(), line, message };
        let mut meta = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(line).map_err(|e| err(i + 1, e.to_string()))? {
                Line::Header(m) if meta.is_none() && i == 0 => meta = Some(m),
                Line::Header(_) => return Err(err(i + 1, "unexpected header".into())),
                Line::Iteration(r) => {
                    if meta.is_none() {
                        return Err(err(i + 1, "record before header".into()));
                    }
                    records.push(r)
                }
            }
        }
        let meta = meta.ok_or_else(|| err(1, "missing header".into()))?;
        Ok(Self { meta, records })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            let phase = match r.phase {
                Phase::Doe => "doe",
                Phase::Bo => "bo",
                Phase::Random => "random",
            };
            w.write_record([
                r.iteration.to_string(),
                phase.to_string(),
                r.observed.to_string(),
                r.incumbent.to_string(),
                opt(r.mean_lengthscale),
                opt(r.max_lengthscale_grad),
                opt(r.vanished),
                opt(r.raasp_start_fraction),
                opt(r.mean_travel_distance),
                opt(r.acq_gradient_steps),
                r.otsd.to_string(),
                r.otsd_solver.as_str().to_string(),
                r.fit_fallback.to_string(),
                r.acq_degenerate.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    write_atomic(path, trace.to_jsonl().as_bytes())
}

pub fn read_trace(path: &Path) -> Result<RunTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    RunTrace::from_jsonl(&text, path)
}
