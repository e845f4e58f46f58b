//! End-to-end checks of the binary: config precedence and validation,
//! report structure, failure documents, exit codes, and byte-level
//! determinism of repeated runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mixfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfrac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("valid JSON")
}

#[test]
fn config_errors_are_listed_all_at_once_with_exit_code_two() {
    let out = mixfrac(&["g1", "--gamma", "1.5", "--nx", "2", "--lambda", "-3"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("gamma = 1.5") && stderr.contains("admissible range is (0, 1)"),
        "gamma violation with admissible range missing: {stderr}"
    );
    assert!(stderr.contains("nx = 2"), "nx violation missing: {stderr}");
    assert!(
        stderr.contains("lambda = -3"),
        "lambda violation missing: {stderr}"
    );
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "nx = 31\ngamma = 0.25\ns = 0.75\neps-floor = 1e-6  # kebab keys normalize\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mixfrac(&[
        "pure-singular",
        "--config",
        cfg.to_str().unwrap(),
        "--gamma",
        "0.3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("report.json"));
    let echoed = &report["config"];
    assert_eq!(echoed["nx"], 31);
    assert_eq!(echoed["s"], 0.75);
    assert_eq!(echoed["gamma"], 0.3, "flag must override the file entry");
    assert_eq!(echoed["eps_floor"], 1e-6);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "frobnicate = 1\n").unwrap();
    let out = mixfrac(&["eigen", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not recognized"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn eigen_report_has_positive_lambda1_and_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mixfrac(&["eigen", "--nx", "63", "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("report.json"));
    assert!(report["lambda1"].as_f64().unwrap() > 0.0);
    assert!(report["residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["spectral_gap_ok"], true);
    assert!(report["e1_min"].as_f64().unwrap() >= 0.0);
    let csv = fs::read_to_string(out_dir.join("e1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,value"));
    assert_eq!(csv.lines().count(), 64, "header plus one row per node");
}

#[test]
fn g2_auto_resolves_to_quarter_estimate_and_separates_energies() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mixfrac(&[
        "g2",
        "--nx",
        "63",
        "--lambda",
        "auto",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("report.json"));
    let lambda = report["config"]["lambda"].as_f64().unwrap();
    let est = report["lambda_est"].as_f64().unwrap();
    assert!((lambda - 0.25 * est).abs() <= 1e-15 * est);
    assert_eq!(report["config"]["lambda_mode"], "auto");
    let e_nu = report["energy_nu"].as_f64().unwrap();
    let e_zeta = report["energy_zeta"].as_f64().unwrap();
    assert!(
        e_nu < 0.0 && 0.0 < e_zeta,
        "energies must separate: {e_nu} vs {e_zeta}"
    );
    assert!(report["distinctness"].as_f64().unwrap() >= 0.5);
    for name in ["nu.csv", "zeta.csv", "barrier.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn solver_failure_writes_stage_message_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mixfrac(&[
        "g2",
        "--nx",
        "33",
        "--lambda",
        "50",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let failure = read_json(&out_dir.join("failure.json"));
    assert_eq!(failure["stage"], "solve");
    assert!(!failure["message"].as_str().unwrap().is_empty());
    assert_eq!(failure["data"]["command"], "g2");
    assert_eq!(failure["data"]["nx"], 33);
}

#[test]
fn repeated_runs_are_bytewise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "pure-singular",
        "--nx",
        "31",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    assert!(mixfrac(&args).status.success());
    let first = fs::read(out_dir.join("report.json")).unwrap();
    let first_csv = fs::read(out_dir.join("v0.csv")).unwrap();
    assert!(mixfrac(&args).status.success());
    assert_eq!(first, fs::read(out_dir.join("report.json")).unwrap());
    assert_eq!(first_csv, fs::read(out_dir.join("v0.csv")).unwrap());
}

#[test]
fn verify_passes_and_dumps_coordinate_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mixfrac(&[
        "verify",
        "--nx",
        "63",
        "--dump-matrices",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["all_passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        assert_eq!(
            c["passed"], true,
            "check {} failed: {}",
            c["name"], c["detail"]
        );
    }
    for name in ["a_local.coo", "a_fractional.coo"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        let line = text.lines().next().unwrap_or("");
        assert_eq!(
            line.split_whitespace().count(),
            3,
            "{name} rows must be `i j value`, got `{line}`"
        );
    }
}
