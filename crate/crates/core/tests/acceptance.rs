//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use hdbo::acquisition::{log_ei_at, AcqConfig};
use hdbo::benchmarks::{griewank, half_ignored, BenchmarkSpec};
use hdbo::diagnostics::otsd::{brute_force, EXACT_LIMIT};
use hdbo::diagnostics::{
    acq_cell, border_analysis, ei_flatness_histogram, gp_sample_dataset, max_grad_cell, mll_surface, otsd,
    total_variation, BorderConfig, SurfaceConfig, SurfacePoint,
};
use hdbo::engine::{random_search, run, MethodPreset};
use hdbo::fit::{fit, FitConfig, InitScheme};
use hdbo::gp::{mll_grad, GpHyperparams, Hyperprior, KernelKind};
use hdbo::rng::rng_for;
use hdbo::trace::RunTrace;
use hdbo::{Dataset, GpModel, Matrix, SINGLE_PRECISION_EPS};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Counts adjacent pairs that break the wanted order.
fn inversions(v: &[f64], nondecreasing: bool) -> usize {
    v.windows(2).filter(|w| if nondecreasing { w[1] < w[0] } else { w[1] > w[0] }).count()
}

fn uniform_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, &[99]);
    let x: Vec<f64> = (0..n * d).map(|_| rng.random()).collect();
    let y = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    Dataset::new(Matrix::from_row_major(n, d, x), y).unwrap()
}

/// Five-point central difference.
fn stencil(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// `‖fd − an‖₂ / ‖an‖₂`, the usual gradient-check error.
fn rel_err(fd: &[f64], an: &[f64]) -> f64 {
    let diff = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / an.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12)
}

fn c1_gradients() -> Outcome {
    let mut worst_ls = 0.0f64;
    let mut worst_acq = 0.0f64;
    let mut acq_checked = 0;
    for inst in 0..50u64 {
        let mut rng = rng_for(inst, &[1]);
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=50);
        let kind = if inst % 2 == 0 { KernelKind::Matern52 } else { KernelKind::Rbf };
        let data = uniform_dataset(n, d, inst);
        let ls: Vec<f64> = (0..d).map(|_| (rng.random_range(-1.5..1.5f64)).exp() * (d as f64).sqrt() / 4.0).collect();
        let params = GpHyperparams::new(ls, rng.random_range(0.5..2.0), rng.random_range(1e-3..1e-1)).unwrap();
        let (_, grad) = mll_grad(&data, &params, &Hyperprior::None, kind).unwrap();
        let raw = params.to_raw();
        let h = 1e-4;
        let fd: Vec<f64> = (0..d)
            .map(|k| {
                let at = |s: f64| {
                    let mut r = raw.clone();
                    r[k] += s;
                    mll_grad(&data, &GpHyperparams::from_raw(&r), &Hyperprior::None, kind).unwrap().0
                };
                stencil(at, h)
            })
            .collect();
        worst_ls = worst_ls.max(rel_err(&fd, &grad[..d]));

        let model = GpModel::condition(data.clone(), params, kind).unwrap();
        let best = data.y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..3 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
            let (v, g) = log_ei_at(&model, &x, best);
            if !v.is_finite() || v.abs() > 50.0 {
                continue;
            }
            acq_checked += 1;
            let h = 1e-4;
            let fd: Vec<f64> = (0..d)
                .map(|i| {
                    let at = |s: f64| {
                        let mut z = x.clone();
                        z[i] += s;
                        log_ei_at(&model, &z, best).0
                    };
                    stencil(at, h)
                })
                .collect();
            worst_acq = worst_acq.max(rel_err(&fd, &g));
        }
    }
    outcome(
        worst_ls <= 1e-4 && worst_acq <= 1e-3 && acq_checked >= 50,
        format!("max rel err ℓ {worst_ls:.2e} (≤1e-4), log-EI {worst_acq:.2e} (≤1e-3) over {acq_checked} points"),
    )
}

fn c2_vanishing() -> Outcome {
    let mut short_vanished = 0;
    let mut scaled_alive = 0;
    let mut worst_short = 0.0f64;
    let mut weakest_scaled = f64::INFINITY;
    for seed in 0..5u64 {
        let data = gp_sample_dataset(1000, 50, 0.5, KernelKind::Matern52, seed).unwrap();
        let g = max_grad_cell(&data, std::f64::consts::LN_2, 50).unwrap();
        worst_short = worst_short.max(g);
        short_vanished += (g < SINGLE_PRECISION_EPS) as usize;
        for d in [10usize, 100, 1000] {
            let data = if d == 1000 {
                data.clone()
            } else {
                gp_sample_dataset(d, 50, 0.5, KernelKind::Matern52, seed).unwrap()
            };
            let g = max_grad_cell(&data, (d as f64).sqrt() / 10.0, 50).unwrap();
            weakest_scaled = weakest_scaled.min(g);
            scaled_alive += (g > SINGLE_PRECISION_EPS) as usize;
        }
    }
    outcome(
        short_vanished == 5 && scaled_alive == 15,
        format!(
            "ln2 init at d=1000 vanished {short_vanished}/5 (max {worst_short:.2e}); √d/10 init alive {scaled_alive}/15 (min {weakest_scaled:.2e})"
        ),
    )
}

fn c3_map_mode() -> Outcome {
    let d = 1000;
    let mut map_ok = 0;
    let mut mle_ok = 0;
    let mut worst_map = 0.0f64;
    let mut worst_mle = 0.0f64;
    for seed in 0..10u64 {
        let one = gp_sample_dataset(d, 1, 0.5, KernelKind::Matern52, seed).unwrap();
        let cfg = FitConfig {
            scheme: InitScheme::ConstantLn2,
            prior: Hyperprior::gamma_3_6(),
            max_steps: 500,
            objective_tolerance: 0.0,
            record_gradient_trace: false,
            ..FitConfig::default()
        };
        let rep = fit(&one, &cfg, &mut rng_for(seed, &[2])).unwrap();
        let err = rep.params.lengthscales.iter().map(|l| (l * 3.0 - 1.0).abs()).fold(0.0, f64::max);
        worst_map = worst_map.max(err);
        map_ok += (err <= 0.05) as usize;

        let ten = gp_sample_dataset(d, 10, 0.5, KernelKind::Matern52, seed).unwrap();
        let ten = ten.with_targets(hdbo::engine::standardize(ten.y())).unwrap();
        let cfg = FitConfig { prior: Hyperprior::None, ..cfg };
        let rep = fit(&ten, &cfg, &mut rng_for(seed, &[2])).unwrap();
        let moved = rep.params.lengthscales.iter().map(|l| (l - std::f64::consts::LN_2).abs()).fold(0.0, f64::max);
        worst_mle = worst_mle.max(moved);
        mle_ok += (moved < 1e-4 && rep.vanished) as usize;
    }
    outcome(
        map_ok == 10 && mle_ok == 10,
        format!("MAP within 5% of 1/3: {map_ok}/10 (worst {worst_map:.2e}); MLE stuck at ln 2: {mle_ok}/10 (max move {worst_mle:.2e})"),
    )
}

fn c4_travel() -> Outcome {
    let mean_travel = |raasp: bool| {
        let acq = AcqConfig { raasp_enabled: raasp, ..AcqConfig::default() };
        (0..5u64).map(|s| acq_cell(100, 0.05, 20, &acq, s).unwrap().mean_travel_distance() / 10.0).sum::<f64>() / 5.0
    };
    let off = mean_travel(false);
    let on = mean_travel(true);
    outcome(off < 1e-9 && on > 1e-6, format!("normalized travel off {off:.2e} (<1e-9), on {on:.2e} (>1e-6)"))
}

fn c5_raasp_trend() -> Outcome {
    let frac = |d: usize, l: f64| {
        (0..10u64).map(|s| acq_cell(d, l, 20, &AcqConfig::default(), s).unwrap().raasp_start_fraction).sum::<f64>()
            / 10.0
    };
    let by_l: Vec<f64> = [0.05, 0.28, 0.5, 1.0].iter().map(|l| frac(1000, *l)).collect();
    let by_d: Vec<f64> = [10usize, 100, 1000].iter().map(|d| frac(*d, 0.05)).collect();
    let (il, id) = (inversions(&by_l, false), inversions(&by_d, true));
    outcome(
        il <= 1 && id <= 1,
        format!("over ℓ at d=1000 {by_l:.2?} ({il} inversions); over d at ℓ=0.05 {by_d:.2?} ({id} inversions)"),
    )
}

fn c6_otsd() -> Outcome {
    let mut worst = 0.0f64;
    let mut monotone = true;
    for inst in 0..100u64 {
        let mut rng = rng_for(inst, &[6]);
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=6);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let curve = otsd::<f64, _>(&pts);
        worst = worst.max((curve.values[n - 1] - brute_force::<f64, _>(&pts)).abs());

        let m = rng.random_range(2..=EXACT_LIMIT);
        let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let curve = otsd::<f64, _>(&pts);
        monotone &= curve.values.windows(2).all(|w| w[1] >= w[0]);
    }
    outcome(
        worst <= 1e-12 && monotone,
        format!("max |exact − brute force| {worst:.1e}; monotone on exact prefixes: {monotone}"),
    )
}

fn finals(traces: &[RunTrace], f: impl Fn(&RunTrace) -> Option<f64>) -> Vec<f64> {
    traces.iter().map(|t| f(t).unwrap()).collect()
}

fn c7_exploration() -> Outcome {
    let spec = BenchmarkSpec::GpSample { dim: 100, lengthscale: 0.5, kernel: KernelKind::Matern52, seed: None };
    let (mut rs, mut mle, mut msr) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..10u64 {
        rs.push(random_search(&spec.build(seed).unwrap(), 30, seed).unwrap());
        mle.push(run(&spec.build(seed).unwrap(), &MethodPreset::MleScaled.method(100), 30, 10, seed).unwrap());
        msr.push(run(&spec.build(seed).unwrap(), &MethodPreset::Msr.method(100), 30, 10, seed).unwrap());
    }
    let (a, b, c) = (
        mean_se(&finals(&rs, RunTrace::final_otsd)),
        mean_se(&finals(&mle, RunTrace::final_otsd)),
        mean_se(&finals(&msr, RunTrace::final_otsd)),
    );
    let pooled = |x: (f64, f64), y: (f64, f64)| (x.1 * x.1 + y.1 * y.1).sqrt();
    let ok = a.0 - b.0 >= -pooled(a, b) && b.0 - c.0 >= -pooled(b, c);
    outcome(
        ok,
        format!("final OTSD random {:.3}±{:.3}, MLE_scaled {:.3}±{:.3}, MSR {:.3}±{:.3}", a.0, a.1, b.0, b.1, c.0, c.1),
    )
}

fn c8_competence() -> Outcome {
    let bench = griewank(100);
    let rs: Vec<RunTrace> = (0..10u64).map(|s| random_search(&bench, 200, s).unwrap()).collect();
    let r = mean_se(&finals(&rs, RunTrace::final_incumbent));
    let mut ok = true;
    let mut detail = format!("random {:.1}±{:.1}", r.0, r.1);
    for preset in [MethodPreset::Msr, MethodPreset::Dsp] {
        let traces: Vec<RunTrace> = (0..10u64).map(|s| run(&bench, &preset.method(100), 200, 10, s).unwrap()).collect();
        let m = mean_se(&finals(&traces, RunTrace::final_incumbent));
        ok &= traces.iter().all(RunTrace::is_completed) && m.0 + m.1 < r.0 - r.1;
        detail.push_str(&format!(", {} {:.1}±{:.1}", preset.name(), m.0, m.1));
    }
    outcome(ok, detail)
}

fn c9_surface() -> Outcome {
    let grid: Vec<f64> = (0..40).map(|i| (0.5f64.ln() + 10f64.ln() * i as f64 / 39.0).exp()).collect();
    let cfg = SurfaceConfig::default();
    let tv = |s: &[SurfacePoint]| total_variation(&s.iter().map(|p| p.total).collect::<Vec<_>>());
    let decreasing = |s: &[SurfacePoint]| s.windows(2).all(|w| w[1].penalty < w[0].penalty);
    let (mut smoother, mut monotone) = (0, 0);
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let full = gp_sample_dataset(100, 50, 1.0, KernelKind::Matern52, seed).unwrap();
        let s50 = mll_surface(&full, &grid, &Hyperprior::None, &cfg).unwrap();
        let s5 = mll_surface(&full.prefix(5), &grid, &Hyperprior::None, &cfg).unwrap();
        smoother += (tv(&s50) < tv(&s5)) as usize;
        monotone += (decreasing(&s50) && decreasing(&s5)) as usize;
        pairs.push(format!("{:.3}/{:.3}", tv(&s50), tv(&s5)));
    }
    outcome(
        smoother == 5 && monotone == 5,
        format!(
            "TV n=50 below n=5 on {smoother}/5 seeds (TV50/TV5 {}); penalty decreasing on [0.5, 5]: {monotone}/5",
            pairs.join(", ")
        ),
    )
}

fn c10_ei_flatness() -> Outcome {
    let grid = [2usize, 10, 100];
    let mut share = vec![0.0; grid.len()];
    for seed in 0..5u64 {
        for (i, h) in ei_flatness_histogram(&grid, 100, 10.0, 2000, 20, seed).unwrap().iter().enumerate() {
            share[i] += h.modal_share / 5.0;
        }
    }
    outcome(inversions(&share, true) == 0, format!("modal-bin share over d {grid:?}: {share:.3?}"))
}

fn c11_border() -> Outcome {
    let bench = half_ignored(100);
    let traces: Vec<RunTrace> =
        (0..10u64).map(|s| run(&bench, &MethodPreset::Dsp.method(100), 200, 10, s).unwrap()).collect();
    let rep = border_analysis(&traces, &bench, &BorderConfig::default()).unwrap();
    let ignored_secondary = rep.labels[50..].iter().filter(|l| **l == hdbo::diagnostics::DimLabel::Secondary).count();
    let sec = rep.f_secondary.mean - rep.f_best.mean;
    let dom = rep.f_dominant.mean - rep.f_best.mean;
    outcome(
        ignored_secondary >= 45 && sec < 0.1 * dom,
        format!(
            "ignored dims secondary {ignored_secondary}/50 (≥45); degradation secondary {sec:.3} vs dominant {dom:.3} (dominant {} secondary {} unstable {})",
            rep.dominant, rep.secondary, rep.unstable
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 11] = [
    (1, "gradient correctness", c1_gradients),
    (2, "vanishing-gradient reproduction", c2_vanishing),
    (3, "MAP converges to the prior mode", c3_map_mode),
    (4, "RAASP travel distance", c4_travel),
    (5, "RAASP origin trend", c5_raasp_trend),
    (6, "OTSD oracle and monotonicity", c6_otsd),
    (7, "exploration ordering", c7_exploration),
    (8, "optimization competence on Griewank", c8_competence),
    (9, "MLL surface shape", c9_surface),
    (10, "EI flatness trend", c10_ei_flatness),
    (11, "border analysis sanity", c11_border),
];

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
