use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinetic_ot::io::{parse_measure_csv, parse_measure_json};
use kinetic_ot_core::measures::validate_measure;

const BIN: &str = env!("CARGO_BIN_EXE_kinetic-ot");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("OTIKIN_THREADS").output().expect("binary runs")
}

fn cost_of(path: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["cost_sq"].as_f64().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn packaged_nonunique_instance_costs_thirty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["discrepancy", "--mu", s(&data("nonunique_mu.json")), "--nu", s(&data("nonunique_nu.json")), "--optimize-T", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((cost_of(&out) - 30.0).abs() <= 1e-8);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["regime"], "finite_T");
}

#[test]
fn oracle_agrees_with_search_on_packaged_instance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let (mu, nu) = (data("random5_mu.json"), data("random5_nu.json"));
    assert!(run(&["oracle", "--mu", s(&mu), "--nu", s(&nu), "--out", s(&a)]).status.success());
    assert!(run(&["discrepancy", "--mu", s(&mu), "--nu", s(&nu), "--optimize-T", "--out", s(&b)]).status.success());
    assert!((cost_of(&a) - cost_of(&b)).abs() <= 1e-9);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, nu) = (data("random5_mu.json"), data("random5_nu.json"));
    let outs: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|threads| {
            let out = dir.path().join(format!("r{threads}.json"));
            let o = run(&["--threads", threads, "discrepancy", "--mu", s(&mu), "--nu", s(&nu), "--out", s(&out)]);
            assert!(o.status.success());
            fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn fixed_and_relaxed_modes() {
    let (mu, nu) = (data("nonunique_mu.json"), data("nonunique_nu.json"));
    let o = run(&["discrepancy", "--mu", s(&mu), "--nu", s(&nu), "--T", "1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["regime"], "fixed_T");
    assert!((v["cost_sq"].as_f64().unwrap() - 30.0).abs() <= 1e-8);
    let o = run(&["discrepancy", "--mu", s(&mu), "--nu", s(&nu), "--tilde"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["cost_sq"].as_f64().unwrap() <= 30.0 + 1e-8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mu = data("nonunique_mu.json");
    assert_eq!(run(&["discrepancy", "--mu", s(&mu)]).status.code(), Some(2));
    assert_eq!(run(&["discrepancy", "--mu", s(&mu), "--nu", "/missing.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dim": 1, "points": [{"x": [0], "v": [1], "w": -1}]}"#).unwrap();
    assert_eq!(run(&["discrepancy", "--mu", s(&mu), "--nu", s(&bad)]).status.code(), Some(3));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(run(&["discrepancy", "--mu", s(&mu), "--nu", s(&bad)]).status.code(), Some(3));

    let line = dir.path().join("line.json");
    fs::write(&line, r#"{"dim": 1, "points": [{"x": [0], "v": [1], "w": 1}]}"#).unwrap();
    assert_eq!(run(&["discrepancy", "--mu", s(&mu), "--nu", s(&line)]).status.code(), Some(4));
}

#[test]
fn examples_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = run(&["verify", "--suite", "paper-examples", "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rows.len(), stdout.lines().count());
}

#[test]
fn csv_measures_round_trip_through_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mu.txt");
    fs::write(&csv, "x1,x2,v1,v2,w\n0,0,2,0,0.5\n0,0,0,2.23606797749979,0.5\n").unwrap();
    let nu = data("nonunique_nu.json");
    // --format overrides the extension for both files.
    let nu_csv = dir.path().join("nu.csv");
    fs::write(&nu_csv, "x1,x2,v1,v2,w\n2,0,2,0,0.5\n0,0,0,2.23606797749979,0.5\n").unwrap();
    let o = run(&["--format", "csv", "discrepancy", "--mu", s(&csv), "--nu", s(&nu_csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["cost_sq"].as_f64().unwrap() - 30.0).abs() <= 1e-8);
    assert_eq!(run(&["--format", "csv", "discrepancy", "--mu", s(&csv), "--nu", s(&nu)]).status.code(), Some(3));
}

#[test]
fn interpolation_frames_hit_both_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frames");
    let (mu, nu) = (data("random5_mu.json"), data("random5_nu.json"));
    let o = run(&["interpolate", "--mu", s(&mu), "--nu", s(&nu), "--T", "1.5", "--steps", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    let frame = |k: usize| {
        let text = fs::read_to_string(out.join(format!("t_{k:06}.csv"))).unwrap();
        validate_measure(&parse_measure_csv(&text).unwrap()).unwrap()
    };
    let read = |p: &Path| validate_measure(&parse_measure_json(&fs::read_to_string(p).unwrap()).unwrap()).unwrap();
    assert!(frame(0).equals_as_point_set(&read(&mu), 1e-12));
    assert!(frame(4).equals_as_point_set(&read(&nu), 1e-12));
    assert!(!frame(2).equals_as_point_set(&read(&mu), 1e-3));
}

#[test]
fn simulation_export_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.json");
    fs::write(&mu, r#"{"dim": 1, "points": [{"x": [1], "v": [0], "w": 1}]}"#).unwrap();
    let out = dir.path().join("sim");
    let o = run(&["simulate", "--mu", s(&mu), "--force", "harmonic", "--t0", "0", "--t1", "6.283185307179586", "--dt", "0.001", "--stride", "1000", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(manifest["force"], "harmonic");
    assert_eq!(files.len(), manifest["times"].as_array().unwrap().len());
    let last = fs::read_to_string(out.join(files.last().unwrap().as_str().unwrap())).unwrap();
    let row: Vec<f64> = last.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((row[0] - 1.0).abs() < 1e-9 && row[1].abs() < 1e-9, "{row:?}");
    // Over one period the action is 2π · ∫ cos² = 2π².
    let action = manifest["action"].as_f64().unwrap();
    assert!((action - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-6);

    let o = run(&["probe", "--suite", "t-ratio", "--mu", s(&mu), "--force", "harmonic", "--t1", "1", "--dt", "0.001", "--t", "0.3", "--h", "0.1,0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("h,T,T_ratio"));
    assert_eq!(text.lines().count(), 3);

    assert_eq!(run(&["simulate", "--mu", s(&mu), "--force", "magnetic", "--t1", "1", "--dt", "0.1", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn poly_force_file() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.json");
    fs::write(&mu, r#"{"dim": 2, "points": [{"x": [0, 0], "v": [0, 0], "w": 1}]}"#).unwrap();
    let spec = format!("poly:{}", s(&data("poly_force.json")));
    let out = dir.path().join("sim");
    let o = run(&["simulate", "--mu", s(&mu), "--force", &spec, "--t1", "1", "--dt", "0.01", "--stride", "50", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").is_file());
}
