use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn diamond_identity_against_identity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"target": {"n_qubits": 1, "gates": []}}"#);
    let out = dir.path().join("out");
    let o = qpd(&["diamond", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0.0");
    let j = read_json(&out.join("diamond.json"));
    assert_eq!(j["diamond_distance"], 0.0);
    assert_eq!(j["seed"], 0);
    assert_eq!(j["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn noiseless_decompose_of_ry_has_unit_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"target": {"gates": [{"name": "ry", "qubits": [0], "angle": 0.8}]}, "decompose": {"method": "exact"}}"#,
    );
    let out = dir.path().join("out");
    let o = qpd(&["decompose", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&out.join("qpd.json"));
    assert!((j["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let chois = read_json(&out.join("chois.json"));
    assert_eq!(chois["data"].as_array().unwrap().len(), j["items"].as_array().unwrap().len());
}

#[test]
fn noiseless_stinespring_takes_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"target": {"gates": [{"name": "cnot", "qubits": [0, 1]}]}, "stinespring": {"depth": 4}}"#,
    );
    let out = dir.path().join("out");
    let o = qpd(&["stinespring", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["status"], "converged");
    assert_eq!(m["iterations"].as_array().unwrap().len(), 1);
    assert_eq!(m["labels"].as_array().unwrap().len(), 1);
    assert!((m["final_gamma"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn stinespring_without_depth_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"target": {"gates": [{"name": "h", "qubits": [0]}]}, "stinespring": {}}"#);
    let o = qpd(&["stinespring", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_keys_and_bad_rates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.json", r#"{"target": {"gates": []}, "noise": {"p3": 0.1}}"#);
    assert_eq!(qpd(&["diamond", "--config", &cfg]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "b.json", r#"{"target": {"gates": []}, "noise": {"p2": 1.5}}"#);
    assert_eq!(qpd(&["diamond", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(qpd(&["diamond", "--config", "/nonexistent.json"]).status.code(), Some(1));
}

#[test]
fn sample_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"target": {"gates": [{"name": "h", "qubits": [0]}, {"name": "cnot", "qubits": [0, 1]}]},
            "noise": {"p2": 0.05},
            "sample": {"shots": 20000, "observable": "ZZ", "mode": "bernoulli"}}"#,
    );
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let o = qpd(&["sample", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
            assert_eq!(o.status.code(), Some(0));
            (fs::read(out.join("report.json")).unwrap(), fs::read(out.join("samples.csv")).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let csv = String::from_utf8(runs[0].1.clone()).unwrap();
    assert!(csv.starts_with("shots,mean,stderr,gamma_total,abort_frac,seed\n"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",11"));
}

#[test]
fn budget_csv_has_one_row_per_gate_and_total() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"target": {"gates": [{"name": "ry", "qubits": [0], "angle": 0.3}, {"name": "h", "qubits": [0]}]},
            "noise": {"p2": 0.02, "p1": 0.01},
            "budget": {"gamma_totals": [1.0, 1.01, 1.05], "points": 6}}"#,
    );
    let out = dir.path().join("out");
    let o = qpd(&["budget", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("budget.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gamma_total,gate_label,gamma_budget,error_contribution"));
    assert_eq!(lines.count(), 6);
    let run = read_json(&out.join("run.json"));
    assert_eq!(run["command"], "budget");
}

#[test]
fn tradeoff_csv_header_and_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"target": {"gates": [{"name": "h", "qubits": [0]}]}, "noise": {"p1": 0.1}, "tradeoff": {"points": 5}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(qpd(&["tradeoff", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("tradeoff.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',').map(|v| v.parse::<f64>().unwrap());
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(csv.lines().next(), Some("gamma_budget,diamond_error"));
    assert_eq!(rows.len(), 5);
    assert!((rows[0].1 - 0.15).abs() < 1e-6);
    assert!(rows[4].1 < 1e-6);
}
