use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn robpoly(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robpoly"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("json error on stderr")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "-d", "2", "-n", "2", "--samples", "300", "--rho", "0.2", "--seed", "9"];
    let a = robpoly(dir.path(), &args);
    let b = robpoly(dir.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,y,is_outlier"));
    assert_eq!(lines.count(), 300);
}

#[test]
fn simulate_without_outliers_flags_none() {
    let dir = tempfile::tempdir().unwrap();
    let out = robpoly(dir.path(), &["simulate", "-d", "1", "-n", "1", "--samples", "200", "--out", "s.csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",false")));
    let meta = read_json(&dir.path().join("s.csv.meta.json"));
    assert_eq!(meta["config"]["command"], "simulate");
    assert_eq!(meta["samples"], 200);
}

#[test]
fn noiseless_fit_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let sim = robpoly(
        dir.path(),
        &["simulate", "-d", "2", "-n", "1", "--sigma", "0", "--samples", "3000", "--out", "s.csv", "--truth-out", "t.json"],
    );
    assert!(sim.status.success());
    let fit = robpoly(dir.path(), &["fit", "-d", "2", "-i", "s.csv", "--eta", "1e-9", "--poly-out", "p.json"]);
    let report = stdout_json(&fit);
    assert_eq!(report["config"]["command"], "fit");
    let truth = read_json(&dir.path().join("t.json"));
    let got = read_json(&dir.path().join("p.json"));
    let a = truth["coeffs"].as_array().unwrap();
    let b = got["coeffs"].as_array().unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn fit_with_outliers_from_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"degree": 2, "dim": 1, "sigma": 0.1, "rho": 0.3,
            "adversary": {"kind": "const_blowup", "magnitude": 1000.0}}"#,
    )
    .unwrap();
    let sim = robpoly(
        dir.path(),
        &["simulate", "--config", "cfg.json", "--samples", "20000", "--seed", "3", "--out", "s.csv", "--truth-out", "t.json"],
    );
    assert!(sim.status.success());
    let fit = robpoly(dir.path(), &["fit", "--config", "cfg.json", "-i", "s.csv", "--truth", "t.json", "--trace-out", "trace.csv"]);
    let report = stdout_json(&fit);
    let err = report["final_error"].as_f64().unwrap();
    assert!(err <= 0.3, "error {err}");
    assert_eq!(report["config"]["rho"], 0.3);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,sup_error\n"));
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x1,y\n0.1,1.0\n0.2,oops\n").unwrap();
    let out = robpoly(dir.path(), &["fit", "-d", "1", "-i", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "input");
    assert_eq!(err["error"]["line"], 3);
}

#[test]
fn bad_config_and_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"degre": 2}"#).unwrap();
    let out = robpoly(dir.path(), &["simulate", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = robpoly(dir.path(), &["simulate", "-n", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("degree"));
    let out = robpoly(dir.path(), &["simulate", "-d", "1", "-n", "1", "--rho", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
    let out = robpoly(dir.path(), &["fit", "--variant", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_empty_cells_are_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "x1,y\n0.5,1.0\n0.6,1.0\n").unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"strict_empty": true}"#).unwrap();
    let out = robpoly(dir.path(), &["fit", "--config", "cfg.json", "-d", "1", "-i", "s.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "numerical");
}

#[test]
fn verify_norms_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = robpoly(dir.path(), &["verify-norms", "--out", "norms"]);
    let summary = stdout_json(&out);
    assert_eq!(summary["all_pass"], true);
    let tight = std::fs::read_to_string(dir.path().join("norms/tightness.csv")).unwrap();
    assert!(tight.starts_with("d,n,ratio,bound\n3,1,3.0,"));
    assert!(dir.path().join("norms/sandwich.csv").exists());
}

#[test]
fn lowerbound_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = robpoly(dir.path(), &["lowerbound", "--trials", "30", "--samples-grid", "0,13"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("M,failure_rate,ci_low,ci_high\n0,"));
    assert_eq!(text.lines().count(), 3);

    let out = robpoly(
        dir.path(),
        &["lowerbound", "--kind", "linear", "--sigma", "0.2", "--trials", "30", "--out", "lin.csv"],
    );
    let meta = stdout_json(&out);
    assert_eq!(meta["details"]["n"], 200);
    assert!(std::fs::read_to_string(dir.path().join("lin.csv")).unwrap().starts_with("M,failure_rate"));
}

#[test]
fn sweep_rows_and_trial_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = robpoly(dir.path(), &["sweep", "-d", "1", "-n", "1", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = robpoly(
        dir.path(),
        &["sweep", "-d", "1", "-n", "1", "--rho", "0.1", "--trials", "20", "--samples-grid", "20,2000", "--seed", "5"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][..5], ["dist", "rho", "M", "trials", "success_rate"]);
    assert_eq!(rows.len(), 3);
    let rate = |r: &Vec<&str>| r[4].parse::<f64>().unwrap();
    assert!(rate(&rows[2]) >= rate(&rows[1]));
    assert!(rate(&rows[2]) >= 0.9);
}
