use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hdbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdbo")).args(args).env_remove("HDBO_OUT_DIR").output().expect("spawn hdbo")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn jsonl_lines(p: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(p).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn minimal_run_writes_header_and_one_record_per_evaluation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "benchmark = \"levy:5\"\npresets = [\"MSR\"]\nbudget = 30\nseeds = [0]\n\n[diagnostics]\ncsv = true\n",
    );
    let out = tmp.path().join("runs");
    let o = hdbo(&["run", s(&cfg), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = out.join("levy-5_MSR_seed0.jsonl");
    let lines = jsonl_lines(&trace);
    assert_eq!(lines.len(), 31);
    assert_eq!(lines[0]["type"], "header");
    assert_eq!(lines[0]["status"]["state"], "completed");
    assert!(lines[1..].iter().all(|l| l["type"] == "iteration"));
    let csv = std::fs::read_to_string(trace.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 14);
}

#[test]
fn one_trace_per_seed_and_preset_and_collision_needs_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "benchmark = \"levy:3\"\npresets = [\"MSR\", \"DSP\"]\nbudget = 8\ndoe_size = 4\nseeds = [1, 2, 3]\n",
    );
    let out = tmp.path().join("runs");
    let o = hdbo(&["run", s(&cfg), "--out-dir", s(&out), "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 6);

    let again = hdbo(&["run", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));

    let forced = hdbo(&["run", s(&cfg), "--out-dir", s(&out), "--force"]);
    assert!(forced.status.success());
}

#[test]
fn output_dir_from_config_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("from_file");
    let body = format!("benchmark = \"levy:2\"\nbudget = 6\ndoe_size = 3\nseeds = [0]\noutput_dir = {:?}\n\n[diagnostics]\nrandom_search = true\n", s(&out));
    let cfg = write_config(tmp.path(), &body);
    let o = hdbo(&["run", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("levy-2_random_seed0.jsonl").exists());
}

#[test]
fn invalid_config_is_a_usage_error_with_line() {
    let tmp = TempDir::new().unwrap();
    let cfg =
        write_config(tmp.path(), "benchmark = \"levy:3\"\npresets = [\"MSR\"]\nbudget = 8\nseeds = [0]\nbogus = 1\n");
    let o = hdbo(&["run", s(&cfg), "--out-dir", s(&tmp.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn heatmap_rows_sidecar_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = hdbo(&[
            "heatmap",
            "mll-grad",
            "--d-grid",
            "2,5",
            "--l-grid",
            "0.1,1,3",
            "--n-obs",
            "8",
            "--steps",
            "5",
            "--reps",
            "2",
            "--seed",
            "4",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a.csv");
    let b = run("b.csv");
    let text = std::fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,lengthscale,statistic,mean,rep_0,rep_1");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["reps"], 2);
    assert_eq!(meta["steps"], 5);
}

#[test]
fn acq_travel_and_raasp_fraction_heatmaps() {
    let tmp = TempDir::new().unwrap();
    for kind in ["acq-travel", "raasp-fraction"] {
        let out = tmp.path().join(format!("{kind}.csv"));
        let o = hdbo(&[
            "heatmap",
            kind,
            "--d-grid",
            "3",
            "--l-grid",
            "0.5",
            "--n-obs",
            "5",
            "--reps",
            "1",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
    }
}

#[test]
fn unknown_heatmap_kind_exits_2() {
    let o = hdbo(&["heatmap", "nope", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn otsd_reads_traces_and_tags_solver() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "benchmark = \"levy:2\"\nbudget = 7\ndoe_size = 3\nseeds = [0, 1]\n\n[diagnostics]\nrandom_search = true\n",
    );
    let out = tmp.path().join("runs");
    assert!(hdbo(&["run", s(&cfg), "--out-dir", s(&out)]).status.success());
    let t0 = out.join("levy-2_random_seed0.jsonl");
    let t1 = out.join("levy-2_random_seed1.jsonl");
    let o = hdbo(&["otsd", s(&t0), s(&t1)]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trace,iteration,otsd,solver");
    assert_eq!(lines.len(), 1 + 2 * 7);
    assert!(lines[1..].iter().all(|l| l.ends_with(",exact") || l.ends_with(",heuristic")));
    // the CSV curve matches what the run recorded
    let recorded: Vec<f64> = jsonl_lines(&t0)[1..].iter().map(|r| r["otsd"].as_f64().unwrap()).collect();
    for (line, want) in lines[1..8].iter().zip(&recorded) {
        let got: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn otsd_without_traces_exits_2() {
    assert_eq!(hdbo(&["otsd"]).status.code(), Some(2));
}

#[test]
fn otsd_missing_file_is_runtime_error() {
    assert_eq!(hdbo(&["otsd", "/nonexistent/trace.jsonl"]).status.code(), Some(1));
}

#[test]
fn analyze_border_needs_two_traces() {
    let o = hdbo(&["analyze-border", "a.jsonl", "--benchmark", "half_ignored:4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_border_report_is_complete_json() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "benchmark = \"half_ignored:4\"\nbudget = 20\ndoe_size = 5\nseeds = [0, 1, 2]\n\n[diagnostics]\nrandom_search = true\n");
    let out = tmp.path().join("runs");
    assert!(hdbo(&["run", s(&cfg), "--out-dir", s(&out)]).status.success());
    let traces: Vec<PathBuf> = (0..3).map(|k| out.join(format!("half_ignored-4_random_seed{k}.jsonl"))).collect();
    let report_path = tmp.path().join("border.json");
    let mut args = vec!["analyze-border"];
    args.extend(traces.iter().map(|p| s(p)));
    args.extend(["--benchmark", "half_ignored:4", "--replacements", "3", "--out", s(&report_path)]);
    let o = hdbo(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(v["benchmark"], "half_ignored-4");
    let r = &v["report"];
    for key in [
        "labels",
        "dominant",
        "secondary",
        "unstable",
        "secondary_runs",
        "boundary_frequency",
        "agreement_threshold",
        "runs",
        "replacements",
        "f_best",
        "f_dominant",
        "f_secondary",
        "f_rand",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["labels"].as_array().unwrap().len(), 4);
    assert_eq!(r["runs"], 3);
    let total = r["dominant"].as_u64().unwrap() + r["secondary"].as_u64().unwrap() + r["unstable"].as_u64().unwrap();
    assert_eq!(total, 4);
}

#[test]
fn analyze_border_rejects_mismatched_benchmark() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "benchmark = \"levy:2\"\nbudget = 6\ndoe_size = 3\nseeds = [0, 1]\n\n[diagnostics]\nrandom_search = true\n",
    );
    let out = tmp.path().join("runs");
    assert!(hdbo(&["run", s(&cfg), "--out-dir", s(&out)]).status.success());
    let a = out.join("levy-2_random_seed0.jsonl");
    let b = out.join("levy-2_random_seed1.jsonl");
    let o = hdbo(&["analyze-border", s(&a), s(&b), "--benchmark", "half_ignored:4"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn surface_and_ei_histogram_write_csv_with_sidecar() {
    let tmp = TempDir::new().unwrap();
    let surf = tmp.path().join("surface.csv");
    let o = hdbo(&["surface", "--d", "4", "--n", "3,6", "--points", "5", "--out", s(&surf)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&surf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,lengthscale,data_fit,penalty,total,total_with_prior");
    assert_eq!(text.lines().count(), 1 + 2 * 5);
    assert!(surf.with_extension("json").exists());

    let hist = tmp.path().join("ei.csv");
    let o =
        hdbo(&["ei-histogram", "--d-grid", "2,5", "--n-obs", "10", "--n-eval", "50", "--bins", "4", "--out", s(&hist)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 1 + 2 * 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(hist.with_extension("json")).unwrap()).unwrap();
    assert!(meta.to_string().contains("modal_share"));
}

#[test]
fn bad_surface_grid_exits_2() {
    let o = hdbo(&["surface", "--l-min", "2", "--l-max", "1", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
