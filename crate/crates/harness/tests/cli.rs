use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relspec_harness::VerificationReport;
use tempfile::TempDir;

fn relspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relspec")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn gapped_spec(dir: &Path, count: usize) -> String {
    write(
        dir,
        "spec.json",
        &format!(r#"{{"n": 12, "count": {count}, "seed": 9, "generator": {{"kind": "gapped", "a": 0.2, "b": 0.3}}}}"#),
    )
}

#[test]
fn verify_is_byte_identical_without_timestamps() {
    let dir = TempDir::new().unwrap();
    let spec = gapped_spec(dir.path(), 20);
    let first = relspec(&["--no-timestamp", "verify", "--config", &spec, "--suite", "ev_bound"]);
    let second = relspec(&["--no-timestamp", "verify", "--config", &spec, "--suite", "ev_bound"]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let reseeded = relspec(&["--no-timestamp", "--seed", "10", "verify", "--config", &spec, "--suite", "ev_bound"]);
    assert_ne!(first.stdout, reseeded.stdout);
}

#[test]
fn report_round_trips_and_timestamps_are_optional() {
    let dir = TempDir::new().unwrap();
    let spec = gapped_spec(dir.path(), 5);
    let out = relspec(&["verify", "--config", &spec, "--suite", "ev_bound"]);
    let report: VerificationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.timestamp.is_some() && report.runtime_seconds.is_some());
    let again: VerificationReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, again);
    assert_eq!(report.passed, 5);

    let csv = relspec(&["--no-timestamp", "--format", "csv", "verify", "--config", &spec, "--suite", "ev_bound"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("trial,trial_passed,check,check_passed,margin\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 2);
}

#[test]
fn strips_with_b_at_least_one_is_a_spec_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"n": 8, "count": 3, "seed": 1, "generator": {"kind": "admissible", "a": 0.1, "b": 1.0}}"#,
    );
    let out = relspec(&["verify", "--config", &spec, "--suite", "strips"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b < 1"));
}

#[test]
fn incompatible_generator_is_a_spec_error() {
    let dir = TempDir::new().unwrap();
    let spec = gapped_spec(dir.path(), 2);
    let out = relspec(&["verify", "--config", &spec, "--suite", "factorizations"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_trials_dump_artifacts_that_replay() {
    let dir = TempDir::new().unwrap();
    let spec = gapped_spec(dir.path(), 3);
    let artifacts = dir.path().join("artifacts");
    // a negative slack makes every containment check fail
    let out = relspec(&[
        "--no-timestamp",
        "--tol=-1",
        "verify",
        "--config",
        &spec,
        "--suite",
        "ev_bound",
        "--artifacts",
        artifacts.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: VerificationReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.failed, 3);

    let trial = artifacts.join("ev_bound-9-1");
    for f in ["h.mtx", "a.mtx", "instance.json"] {
        assert!(trial.join(f).exists(), "{f} missing");
    }
    let replayed = relspec(&["replay", "--dir", trial.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(1));
    let outcome: relspec_harness::TrialOutcome = serde_json::from_slice(&replayed.stdout).unwrap();
    assert_eq!(outcome, report.trials[1]);
}

#[test]
fn window_reports_violations_with_exit_one() {
    let dir = TempDir::new().unwrap();
    let h = write(dir.path(), "h.txt", "2\n-10 0\n0 10\n");
    let small = write(dir.path(), "small.txt", "2\n0.5 0\n0 -0.5\n");
    let large = write(dir.path(), "large.txt", "2\n5 0\n0 -5\n");

    let ok = relspec(&["window", &h, &small, "--a", "0.2", "--b", "0.3", "--mode", "w0"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    let w = v["window"].as_array().unwrap();
    assert!((w[0].as_f64().unwrap() + 6.8).abs() < 1e-12);
    assert!((w[1].as_f64().unwrap() - 6.8).abs() < 1e-12);
    assert_eq!(v["verified"], true);

    // A is far from admissible for (0.2, 0.3): both eigenvalues land inside
    let bad = relspec(&["window", &h, &large, "--a", "0.2", "--b", "0.3", "--mode", "w0"]);
    assert_eq!(bad.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 2);
}

#[test]
fn factorize_writes_factors_and_report() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "t.txt", "3\n4 1 2\n1 3 0.5\n2 0.5 -5\n");
    let cfg = write(dir.path(), "block.json", r#"{"p": 2, "matrix": "t.txt"}"#);
    let out_dir = dir.path().join("out");
    let out = relspec(&["factorize", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["inertia"], serde_json::json!([2, 1, 0]));
    assert!(v["F_norm"].as_f64().unwrap() > 0.0);
    assert!(out_dir.join("W.mtx").exists() && out_dir.join("D.mtx").exists());
}

#[test]
fn spectrum_track_and_bounds_emit_tables() {
    let dir = TempDir::new().unwrap();
    let h = write(dir.path(), "h.txt", "3\n-10 0 0\n0 0.3 0\n0 0 10\n");
    let a = write(dir.path(), "a.txt", "3\n0.1 0 0\n0 0.1 0\n0 0 0.1\n");

    let out = relspec(&["spectrum", "--h", &h]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["inertia"], serde_json::json!([2, 1, 0]));

    let out = relspec(&[
        "--format", "csv", "track", "--h", &h, "--a", &a, "--eps0", "0", "--eps1", "1", "--steps", "4", "--window",
        "-5,5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epsilon,lambda_1,dlambda_1"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - 0.4).abs() < 1e-12 && (last[2] - 0.1).abs() < 1e-12);

    let out = relspec(&[
        "--format", "csv", "bounds", "--h", &h, "--a", &a, "--rel-a", "0.2", "--rel-b", "0.3", "--gap", "-10,10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,lambda_k,lower,upper,mu_k,within\n1,0.3,"));
    assert!(text.trim_end().ends_with("true"));
}

#[test]
fn asymmetric_input_warns() {
    let dir = TempDir::new().unwrap();
    let h = write(dir.path(), "h.txt", "2\n1 0.5\n0 2\n");
    let out = relspec(&["spectrum", "--h", &h]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("asymmetric"));
}

#[test]
fn missing_file_exits_two() {
    let out = relspec(&["spectrum", "--h", "/nonexistent/h.mtx"]);
    assert_eq!(out.status.code(), Some(2));
}
