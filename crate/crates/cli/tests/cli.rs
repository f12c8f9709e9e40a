use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brenier-ot"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_pair(dir: &Path) {
    std::fs::write(dir.join("a.csv"), "w,x1\n0.5,0\n0.5,2\n").unwrap();
    std::fs::write(dir.join("b.csv"), "w,x1\n0.5,1\n0.5,3\n").unwrap();
}

fn scattered(dir: &Path) {
    let mut a = String::from("w,x1,x2\n");
    for i in 0..40 {
        let t = i as f64 * 0.7548776662;
        a += &format!("0.025,{},{}\n", t.fract(), (t * 1.3247).fract());
    }
    std::fs::write(dir.join("c.csv"), a).unwrap();
    std::fs::write(
        dir.join("d.csv"),
        "w,x1,x2\n0.2,0.1,0.2\n0.2,0.8,0.3\n0.2,0.4,0.9\n0.2,0.6,0.6\n0.2,0.2,0.7\n",
    )
    .unwrap();
}

#[test]
fn solve_writes_plan_duals_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = run(dir.path(), &["solve", "--mu", "a.csv", "--nu", "b.csv", "--out", "sol"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plan = std::fs::read_to_string(dir.path().join("sol/plan.csv")).unwrap();
    assert_eq!(plan, "i,j,mass\n0,0,0.5\n1,1,0.5\n");
    let duals = json(dir.path().join("sol/duals.json"));
    assert_eq!(duals["g"][1], 0.0);
    let summary = json(dir.path().join("sol/summary.json"));
    assert_eq!(summary["primal_value"], 0.5);
    let manifest = json(dir.path().join("sol/manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["exit_code"], 0);
    assert!(manifest["version"].is_string());
}

#[test]
fn potential_and_map_follow_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let solve = ["solve", "--mu", "a.csv", "--nu", "b.csv", "--strict-duals", "--out", "sol"];
    assert!(run(dir.path(), &solve).status.success());
    let out = run(
        dir.path(),
        &["potential", "--nu", "b.csv", "--duals", "sol/duals.json", "--tighten", "--out", "pot"],
    );
    assert!(out.status.success());
    let pot = json(dir.path().join("pot/potential.json"));
    assert_eq!(pot["tightened"], true);
    let out = run(
        dir.path(),
        &["map", "--potential", "pot/potential.json", "--points", "a.csv", "--out", "map", "--format", "json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(dir.path().join("map/map.json"));
    let images: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["map"][0].as_f64().unwrap()).collect();
    assert_eq!(images, vec![1.0, 3.0]);
}

#[test]
fn map_rejects_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    assert!(run(dir.path(), &["potential", "--nu", "b.csv", "--mu", "a.csv", "--out", "pot"]).status.success());
    std::fs::write(dir.path().join("pts.csv"), "x1,x2\n0,0\n").unwrap();
    let out = run(dir.path(), &["map", "--potential", "pot/potential.json", "--points", "pts.csv", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn semidual_matches_solve() {
    let dir = tempfile::tempdir().unwrap();
    scattered(dir.path());
    assert!(run(dir.path(), &["solve", "--mu", "c.csv", "--nu", "d.csv", "--out", "lp"]).status.success());
    let out = run(dir.path(), &["semidual", "--mu", "c.csv", "--nu", "d.csv", "--out", "sd"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lp = json(dir.path().join("lp/summary.json"))["primal_value"].as_f64().unwrap();
    let sd = json(dir.path().join("sd/summary.json"))["transport_cost"].as_f64().unwrap();
    assert!((lp - sd).abs() < 1e-9, "{lp} vs {sd}");
    let offsets = std::fs::read_to_string(dir.path().join("sd/offsets.csv")).unwrap();
    assert!(offsets.starts_with("j,g\n"));
    assert_eq!(offsets.lines().count(), 6);
    assert!(dir.path().join("sd/trace.csv").exists());
}

#[test]
fn unknown_flag_prints_usage_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["rates", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn bad_weights_exit_2_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    std::fs::write(dir.path().join("bad.csv"), "w,x1\n0.5,0\n0.6,2\n").unwrap();
    let out = run(dir.path(), &["solve", "--mu", "bad.csv", "--nu", "b.csv", "--out", "e"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights sum 1.1"));
    let manifest = json(dir.path().join("e/manifest.json"));
    assert_eq!(manifest["exit_code"], 2);
}

#[test]
fn iteration_limit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    scattered(dir.path());
    let out = run(dir.path(), &["semidual", "--mu", "c.csv", "--nu", "d.csv", "--max-iter", "1", "--out", "sd"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(dir.path().join("sd/manifest.json"))["exit_code"], 3);
}

#[test]
fn rates_row_count_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rates", "--scenario", "map-rate-1d", "--trials", "5", "--n", "50,100,200", "--seed", "9", "--out", "r",
    ];
    let out = run(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r/records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
    assert!(csv.starts_with("n,m,trial,seed,error_value,oracle_kind,wall_time_ms\n"));
    let manifest = json(dir.path().join("r/manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["n_grid"], serde_json::json!([50, 100, 200]));

    let again = run(dir.path(), &[&args[..10], &["r2", "--format", "json"]].concat());
    assert!(again.status.success());
    let first: Vec<Value> = csv
        .lines()
        .skip(1)
        .map(|l| Value::from(l.split(',').nth(4).unwrap().parse::<f64>().unwrap()))
        .collect();
    let second: Vec<Value> = json(dir.path().join("r2/records.json"))
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["error_value"].clone())
        .collect();
    assert_eq!(first, second);
}

#[test]
fn rates_rejects_demo_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["rates", "--scenario", "figure1-demo", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coupling_rates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["coupling-rates", "--trials", "2", "--n", "12,25", "--out", "c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(dir.path().join("c/summary.json"));
    assert_eq!(summary["scenario"], "coupling-rate");
    assert_eq!(summary["levels"].as_array().unwrap().len(), 2);
}

#[test]
fn bounds_check_writes_verdict() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("inst.json"),
        r#"{"source": {"kind": "uniform-box", "lo": [-1.0], "hi": [1.0]},
            "target": {"kind": "finite-atoms", "points": [[-0.5], [0.5]], "weights": [0.5, 0.5]},
            "sample_size": 60, "mc_samples": 5000}"#,
    )
    .unwrap();
    let out = run(dir.path(), &["bounds-check", "--instance", "inst.json", "--out", "v"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verdict = json(dir.path().join("v/verdict.json"));
    assert_eq!(verdict["holds"], true);
    assert!(verdict["report"]["lhs"].as_f64().unwrap() <= verdict["report"]["rhs"].as_f64().unwrap());
    assert!(verdict["l1_margin"].as_f64().unwrap() >= 0.0);

    std::fs::write(dir.path().join("bad.json"), r#"{"source": 1}"#).unwrap();
    assert_eq!(run(dir.path(), &["bounds-check", "--instance", "bad.json"]).status.code(), Some(2));
}

#[test]
fn demo_emits_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["demo", "figure1", "--n", "100,400", "--trials", "1", "--grid", "2500", "--out", "d"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["samples.csv", "atoms.csv", "cells.csv", "summary.json", "manifest.json"] {
        assert!(dir.path().join("d").join(f).exists(), "{f}");
    }
    let summary = json(dir.path().join("d/summary.json"));
    assert_eq!(summary["distinct_values"], serde_json::json!([4, 4]));
}
