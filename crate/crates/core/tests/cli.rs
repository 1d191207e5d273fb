//! Every subcommand end to end through the binary, checking output formats.

use matrix_router::orchestrator::read_log;
use matrix_router::workload::read_trace;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_matrix-router"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn subcommands_share_flags_and_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = scenario("bursty.toml");
    let trace = d.join("trace.jsonl");

    run(&["gen-trace", "--config", p(&config), "--seed", "3", "--out", p(&trace)]);
    let arrivals = read_trace(&trace).unwrap();
    assert!(!arrivals.is_empty());

    let sim_out = d.join("sim");
    let tr = p(&trace);
    run(&[
        "simulate",
        "--config",
        p(&config),
        "--trace",
        tr,
        "--seed",
        "3",
        "--out",
        p(&sim_out),
    ]);
    let report = json(&sim_out.join("report.json"));
    assert_eq!(report["metrics"]["n_total"].as_u64().unwrap() as usize, arrivals.len());
    let outcomes = std::fs::read_to_string(sim_out.join("outcomes.jsonl")).unwrap();
    assert_eq!(outcomes.lines().count(), arrivals.len());

    // same trace and seed: a repeated run is byte-identical
    let again = d.join("sim2");
    run(&[
        "simulate",
        "--config",
        p(&config),
        "--trace",
        tr,
        "--seed",
        "3",
        "--out",
        p(&again),
    ]);
    assert_eq!(
        std::fs::read(sim_out.join("report.json")).unwrap(),
        std::fs::read(again.join("report.json")).unwrap()
    );

    let cmp = d.join("cmp");
    let cmp_dir = p(&cmp);
    run(&[
        "compare",
        "--config",
        p(&config),
        "--trace",
        tr,
        "--seed",
        "3",
        "--out",
        cmp_dir,
    ]);
    let csv = std::fs::read_to_string(cmp.join("comparison.csv")).unwrap();
    assert!(csv.starts_with("strategy,"));
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(json(&cmp.join("comparison.json"))["rows"].as_array().unwrap().len(), 3);
    assert!(cmp.join("comparison.txt").exists());

    let grid = d.join("grid");
    let args = [
        "grid-search",
        "--config",
        p(&config),
        "--trace",
        tr,
        "--seed",
        "3",
        "--values",
        "0,1",
    ];
    run(&[&args[..], &["--out", p(&grid)]].concat());
    assert_eq!(
        std::fs::read_to_string(grid.join("grid.csv")).unwrap().lines().count(),
        1 + 7
    );
    assert_eq!(json(&grid.join("grid.json"))["results"].as_array().unwrap().len(), 4);

    let model = d.join("model").join("classifier.bin");
    let stdout = run(&["train-classifier", "--trace", tr, "--seed", "3", "--out", p(&model)]);
    assert!(stdout.contains("held-out accuracy"));
    assert!(model.exists());
    let report = json(&model.with_extension("report.json"));
    assert!(report["holdout_accuracy"].as_f64().unwrap() >= 0.9);

    // the gateway config names a relative decision log; point it at the temp dir
    let gw_dir = d.join("gw");
    std::fs::create_dir_all(&gw_dir).unwrap();
    for f in ["gateway.toml", "matrix.toml", "keywords.toml"] {
        std::fs::copy(scenario(f), gw_dir.join(f)).unwrap();
    }
    let replay = d.join("replay");
    let gw = gw_dir.join("gateway.toml");
    let args = [
        "replay-gateway",
        "--gateway-config",
        p(&gw),
        "--trace",
        tr,
        "--seed",
        "3",
    ];
    run(&[&args[..], &["--out", p(&replay)]].concat());
    let metrics = json(&replay.join("metrics.json"));
    assert_eq!(metrics["n_total"].as_u64().unwrap() as usize, arrivals.len());
    assert_eq!(read_log(gw_dir.join("decisions.jsonl")).unwrap().len(), arrivals.len());
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_matrix-router"))
        .args(["simulate"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}
