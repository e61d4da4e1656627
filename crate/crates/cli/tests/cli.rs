use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_ruingame");

fn p0(extra: Value) -> Value {
    let mut cfg = json!({
        "market": { "mu": 0.08, "r": 0.02, "sigma": 0.2, "lambda": 0.04, "rho": 1.0, "a": 1.0 },
        "e": { "kind": "constant", "value": 0.5 },
        "l": { "kind": "constant", "value": 0.0 },
        "grid": { "lo": 1.0, "hi": 8.0, "step": 0.1 }
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    cfg
}

fn run(dir: &Path, cmd: &str, cfg: &Value, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec(cfg).unwrap()).unwrap();
    Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("RUINGAME_WORKERS")
        .output()
        .unwrap()
}

fn rows(dir: &Path, name: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(dir.join("out").join(name))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn value_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "value", &p0(json!({})), &[]);
    assert_eq!(out.status.code(), Some(0));
    let table = rows(dir.path(), "value.csv");
    assert_eq!(table.len(), 71);
    assert_eq!(table[0][1], 1.0);
    for r in table.iter().filter(|r| r[0] >= 6.89) {
        assert_eq!((r[1], r[2]), (0.0, 0.0));
    }
    let summary: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/value_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["b"], "inf");
    assert!((summary["d"].as_f64().unwrap() - 6.88235294).abs() < 1e-8);

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "value");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["checksums"]["value.csv"].is_string());
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn empty_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p0(json!({ "grid": { "lo": 2.0, "hi": 1.0, "step": 0.1 } }));
    assert_eq!(run(dir.path(), "value", &cfg, &[]).status.code(), Some(1));
}

#[test]
fn invalid_problem_exits_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = p0(json!({}));
    cfg["market"]["mu"] = json!(0.02);
    let out = run(dir.path(), "value", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("μ > r"));
    let out = run(dir.path(), "validate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("out/validation.json").exists());
}

#[test]
fn unknown_keys_and_bad_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p0(json!({ "colour": 1 }));
    assert_eq!(run(dir.path(), "value", &cfg, &[]).status.code(), Some(1));
    let ok = p0(json!({}));
    assert_eq!(run(dir.path(), "value", &ok, &["--workers", "0"]).status.code(), Some(1));
    let out = Command::new(BIN).arg("value").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn game_cost_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p0(json!({ "game_cost": { "x": [1.0, 7.0] } }));
    assert_eq!(run(dir.path(), "game-cost", &cfg, &[]).status.code(), Some(0));
    let table = rows(dir.path(), "saddle.csv");
    assert_eq!(table.len(), 6);
    for r in &table {
        let expected = if r[1] == 1.0 { 1.0 } else { 0.0 };
        assert_eq!(r[2], expected);
    }
}

#[test]
fn simulate_repeats_byte_for_byte() {
    let cfg = p0(json!({
        "x": 2.0,
        "sim": { "n": 4, "dt": 1e-3, "paths": 500, "seed": 5, "estimator": "sampled-death" }
    }));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), "simulate", &cfg, &["--workers", "2"]).status.code(), Some(0));
    assert_eq!(run(b.path(), "simulate", &cfg, &["--workers", "3"]).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("out/sim.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let table = rows(a.path(), "sim.csv");
    assert_eq!(table.len(), 1);
    let gap = table[0][11];
    assert!((gap - (table[0][5] - 0.83).abs()).abs() < 1e-12);
}

#[test]
fn convergence_gate_breach_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p0(json!({
        "x": 2.0,
        "sim": { "n": 1, "dt": 1e-3, "paths": 200, "seed": 5, "estimator": "tilted" },
        "convergence": { "n_list": [1, 2], "max_gap": 0.0, "monotone": false }
    }));
    let out = run(dir.path(), "convergence", &cfg, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(rows(dir.path(), "sim.csv").len(), 2);
}
