//! `hdbo`: run BO experiments and the diagnostic sweeps, write traces and CSVs.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hdbo::benchmarks::BenchmarkSpec;
use hdbo::diagnostics::{
    acq_travel_heatmap, border_analysis, default_d_grid, default_lengthscale_grid, ei_flatness_histogram,
    gp_sample_dataset, mll_surface, otsd, raasp_fraction_heatmap, vanishing_grad_heatmap, write_with_sidecar,
    BorderConfig, SurfaceConfig,
};
use hdbo::engine::{random_search, run};
use hdbo::gp::{Hyperprior, KernelKind};
use hdbo::trace::{read_trace, write_atomic, write_trace, RunTrace};
use rayon::prelude::*;
use serde_json::json;

use config::{ExperimentConfig, Job};

/// Bad invocation or input the user has to fix; exits with status 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

#[derive(Debug, Parser)]
#[command(name = "hdbo", version, about = "High-dimensional Bayesian optimization runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HeatmapKind {
    /// Max length-scale gradient over the first fit steps.
    MllGrad,
    /// Normalized travel distance of acquisition ascents.
    AcqTravel,
    /// Share of ascent starts drawn from RAASP candidates.
    RaaspFraction,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kernel {
    Matern52,
    Rbf,
}

impl From<Kernel> for KernelKind {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Matern52 => KernelKind::Matern52,
            Kernel::Rbf => KernelKind::Rbf,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Prior {
    None,
    /// Gamma(3, 6).
    Gamma,
    /// Dimensionality-scaled log-normal.
    Dsp,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (seed, method) pair of an experiment file and write one JSONL trace each.
    Run {
        /// TOML experiment file.
        config: PathBuf,
        /// Output directory; overrides the file's `output_dir`, then $HDBO_OUT_DIR, then ./runs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overwrite existing traces.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Sweep a (dimension × length scale) grid and write a CSV with a JSON sidecar.
    Heatmap {
        kind: HeatmapKind,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',')]
        d_grid: Option<Vec<usize>>,
        /// Comma-separated length scales (initial ℓ for mll-grad, true ℓ otherwise).
        #[arg(long, value_delimiter = ',')]
        l_grid: Option<Vec<f64>>,
        /// Points of the default log-spaced length-scale grid.
        #[arg(long, default_value_t = 8)]
        l_points: usize,
        /// Observations per dataset (default 50 for mll-grad, 20 otherwise).
        #[arg(long)]
        n_obs: Option<usize>,
        /// Length scale of the sampled objective (mll-grad only).
        #[arg(long, default_value_t = 0.5)]
        true_lengthscale: f64,
        /// Fit steps inspected (mll-grad only).
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable RAASP candidates (acq-travel only).
        #[arg(long)]
        no_raasp: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Recompute the OTSD curve of each trace.
    Otsd {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label dimensions dominant or secondary from the boundary frequency of top points.
    AnalyzeBorder {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Benchmark id the traces were run on, e.g. `half_ignored:100`.
        #[arg(long)]
        benchmark: String,
        #[arg(long, default_value_t = 0.1)]
        top_fraction: f64,
        #[arg(long, default_value_t = 10)]
        replacements: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Isotropic MLL sweep split into data fit and penalty, per number of observations.
    Surface {
        #[arg(long, default_value_t = 100)]
        d: usize,
        /// Comma-separated observation counts; smaller sets are prefixes of the largest.
        #[arg(long, value_delimiter = ',', default_value = "5,50")]
        n: Vec<usize>,
        /// Length scale of the sampled objective.
        #[arg(long, default_value_t = 1.0)]
        lengthscale: f64,
        #[arg(long, default_value_t = 0.05)]
        l_min: f64,
        #[arg(long, default_value_t = 20.0)]
        l_max: f64,
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, default_value_t = 1e-8)]
        noise: f64,
        #[arg(long, value_enum, default_value = "matern52")]
        kernel: Kernel,
        #[arg(long, value_enum, default_value = "none")]
        prior: Prior,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of EI values at Sobol points, one per dimension.
    EiHistogram {
        #[arg(long, value_delimiter = ',', default_value = "2,10,100")]
        d_grid: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        n_obs: usize,
        #[arg(long, default_value_t = 10.0)]
        lengthscale: f64,
        #[arg(long, default_value_t = 2000)]
        n_eval: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return usage("--jobs must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out_dir, force, jobs } => cmd_run(&config, out_dir, force, jobs),
        Command::Heatmap {
            kind,
            d_grid,
            l_grid,
            l_points,
            n_obs,
            true_lengthscale,
            steps,
            reps,
            seed,
            no_raasp,
            out,
            jobs,
        } => {
            let d_grid = d_grid.unwrap_or_else(default_d_grid);
            let max_d = d_grid.iter().copied().max().unwrap_or(1);
            let l_grid = l_grid.unwrap_or_else(|| default_lengthscale_grid(max_d, l_points));
            let pool = pool(jobs)?;
            let mut meta = json!({
                "kind": format!("{kind:?}"),
                "d_grid": d_grid,
                "lengthscale_grid": l_grid,
                "reps": reps,
                "seed": seed,
            });
            let result = pool.install(|| match kind {
                HeatmapKind::MllGrad => {
                    let n = n_obs.unwrap_or(50);
                    meta["n_obs"] = json!(n);
                    meta["true_lengthscale"] = json!(true_lengthscale);
                    meta["steps"] = json!(steps);
                    vanishing_grad_heatmap(&d_grid, &l_grid, n, true_lengthscale, steps, reps, seed)
                }
                HeatmapKind::AcqTravel => {
                    let n = n_obs.unwrap_or(20);
                    meta["n_obs"] = json!(n);
                    meta["raasp"] = json!(!no_raasp);
                    acq_travel_heatmap(&d_grid, &l_grid, n, !no_raasp, reps, seed)
                }
                HeatmapKind::RaaspFraction => {
                    let n = n_obs.unwrap_or(20);
                    meta["n_obs"] = json!(n);
                    raasp_fraction_heatmap(&d_grid, &l_grid, n, reps, seed)
                }
            });
            let result = result.map_err(input_error)?;
            meta["kind"] = json!(result.kind.as_str());
            write_with_sidecar(&out, &result.to_csv()?, &meta)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::Otsd { traces, out } => cmd_otsd(&traces, out.as_deref()),
        Command::AnalyzeBorder { traces, benchmark, top_fraction, replacements, seed, out } => {
            if traces.len() < 2 {
                return usage(format!("border analysis needs at least 2 traces, got {}", traces.len()));
            }
            let spec = BenchmarkSpec::parse(&benchmark).map_err(input_error)?;
            let bench = spec.build(seed)?;
            let loaded = traces.iter().map(|p| read_trace(p)).collect::<hdbo::Result<Vec<RunTrace>>>()?;
            let cfg = BorderConfig { top_fraction, replacements, seed };
            let report = border_analysis(&loaded, &bench, &cfg).map_err(|e| match e {
                hdbo::Error::Config(_) | hdbo::Error::DimensionMismatch { .. } => input_error(e),
                other => other.into(),
            })?;
            let mut text = serde_json::to_string_pretty(&json!({ "benchmark": spec.id(), "report": report }))?;
            text.push('\n');
            emit(out.as_deref(), &text)
        }
        Command::Surface { d, n, lengthscale, l_min, l_max, points, noise, kernel, prior, seed, out } => {
            if n.is_empty() || n.contains(&0) || points < 2 || !(l_min > 0.0 && l_max > l_min) {
                return usage("surface needs positive observation counts, at least 2 points and 0 < l-min < l-max");
            }
            let grid: Vec<f64> = (0..points)
                .map(|i| (l_min.ln() + (l_max / l_min).ln() * i as f64 / (points - 1) as f64).exp())
                .collect();
            let prior = match prior {
                Prior::None => Hyperprior::None,
                Prior::Gamma => Hyperprior::gamma_3_6(),
                Prior::Dsp => Hyperprior::dim_scaled(d),
            };
            let cfg = SurfaceConfig { noise_variance: noise, kernel: kernel.into(), ..SurfaceConfig::default() };
            let max_n = n.iter().copied().max().unwrap_or(1);
            let full = gp_sample_dataset(d, max_n, lengthscale, kernel.into(), seed).map_err(input_error)?;
            let mut w = csv_out(&["n", "lengthscale", "data_fit", "penalty", "total", "total_with_prior"]);
            for &k in &n {
                for p in mll_surface(&full.prefix(k), &grid, &prior, &cfg)? {
                    w.push(&[
                        k.to_string(),
                        p.lengthscale.to_string(),
                        p.data_fit.to_string(),
                        p.penalty.to_string(),
                        p.total.to_string(),
                        p.total_with_prior.to_string(),
                    ]);
                }
            }
            let meta = json!({
                "kind": "mll-surface", "d": d, "n": n, "true_lengthscale": lengthscale, "noise_variance": noise,
                "kernel": KernelKind::from(kernel), "prior": prior, "seed": seed,
            });
            write_with_sidecar(&out, &w.finish(), &meta)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Command::EiHistogram { d_grid, n_obs, lengthscale, n_eval, bins, seed, out } => {
            let hists = ei_flatness_histogram(&d_grid, n_obs, lengthscale, n_eval, bins, seed).map_err(input_error)?;
            let mut w = csv_out(&["d", "bin", "lo", "hi", "count"]);
            for h in &hists {
                for (b, c) in h.counts.iter().enumerate() {
                    w.push(&[
                        h.d.to_string(),
                        b.to_string(),
                        h.edges[b].to_string(),
                        h.edges[b + 1].to_string(),
                        c.to_string(),
                    ]);
                }
            }
            let meta = json!({
                "kind": "ei-histogram", "d_grid": d_grid, "n_obs": n_obs, "lengthscale": lengthscale,
                "n_eval": n_eval, "bins": bins, "seed": seed,
                "modal_share": hists.iter().map(|h| h.modal_share).collect::<Vec<_>>(),
            });
            write_with_sidecar(&out, &w.finish(), &meta)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

/// Configuration mistakes surfaced by the library are usage errors.
fn input_error(e: hdbo::Error) -> anyhow::Error {
    match e {
        hdbo::Error::Config(_) | hdbo::Error::DimensionMismatch { .. } => Usage(e.to_string()).into(),
        other => other.into(),
    }
}

struct CsvOut(csv::Writer<Vec<u8>>);

fn csv_out(header: &[&str]) -> CsvOut {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    CsvOut(w)
}

impl CsvOut {
    fn push(&mut self, row: &[String]) {
        self.0.write_record(row).expect("writing to memory");
    }

    fn finish(self) -> String {
        String::from_utf8(self.0.into_inner().expect("flushing to memory")).expect("CSV fields are UTF-8")
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            write_atomic(p, text.as_bytes())?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn resolve_out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("HDBO_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn execute(job: &Job, doe_size: usize, budget: usize) -> Result<RunTrace> {
    let bench = job.spec.build(job.seed)?;
    let trace = match &job.method {
        Some(m) => run(&bench, m, budget, doe_size, job.seed)?,
        None => random_search(&bench, budget, job.seed)?,
    };
    Ok(trace)
}

fn cmd_run(path: &Path, out_dir: Option<PathBuf>, force: bool, jobs: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ExperimentConfig::parse(&text, path).map_err(Usage)?;
    let dir = resolve_out_dir(out_dir, &cfg);
    let planned = cfg.jobs(&dir)?;
    if !force {
        if let Some(j) = planned.iter().find(|j| j.path.exists()) {
            return usage(format!("{} already exists; pass --force to overwrite", j.path.display()));
        }
    }
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = pool(jobs)?;
    let results: Vec<Result<bool>> = pool.install(|| {
        planned
            .par_iter()
            .map(|job| {
                let trace = execute(job, cfg.doe_size, cfg.budget)
                    .with_context(|| format!("{} seed {}", job.label, job.seed))?;
                write_trace(&job.path, &trace)?;
                if cfg.diagnostics.csv {
                    write_atomic(&job.path.with_extension("csv"), trace.to_csv()?.as_bytes())?;
                }
                let done = trace.is_completed();
                let status = if done { "completed".to_string() } else { format!("{:?}", trace.meta.status) };
                eprintln!("wrote {} ({status})", job.path.display());
                Ok(done)
            })
            .collect()
    });
    let mut aborted = 0;
    for r in results {
        if !r? {
            aborted += 1;
        }
    }
    if aborted > 0 {
        anyhow::bail!("{aborted} run(s) aborted; partial traces were written");
    }
    Ok(())
}

fn cmd_otsd(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut w = csv_out(&["trace", "iteration", "otsd", "solver"]);
    for p in paths {
        let trace = read_trace(p)?;
        let curve = otsd::<f64, _>(&trace.queries());
        let name = p.display().to_string();
        for (i, (v, s)) in curve.values.iter().zip(&curve.solver).enumerate() {
            w.push(&[name.clone(), i.to_string(), v.to_string(), s.as_str().to_string()]);
        }
    }
    emit(out, &w.finish())
}
