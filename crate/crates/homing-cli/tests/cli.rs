//! End-to-end checks of the installed binary: exit codes, stdout payloads,
//! artifact files, and cross-process determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn homing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body.to_string()).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn simulate_writes_trajectories_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "spec.json",
        &serde_json::json!({
            "format": "homing-scenario/1",
            "seed": 3,
            "params": {"record_every": 100}
        }),
    );
    let out_dir = dir.path().join("runs");
    let out = homing(&[
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["format"], "homing-run/1");
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 9);
    for run in runs {
        assert_eq!(run["terminated_by"], "grad_tol");
        assert!(run["final_distance"].as_f64().unwrap() < 1e-3);
    }
    for k in 0..9 {
        assert!(out_dir.join(format!("run_{k:03}.csv")).exists());
    }
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // too few landmarks
    let spec = write_spec(
        dir.path(),
        "bad.json",
        &serde_json::json!({"format": "homing-scenario/1", "n_landmarks": 1}),
    );
    let out = homing(&["simulate", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // unknown format version
    let spec = write_spec(
        dir.path(),
        "vers.json",
        &serde_json::json!({"format": "homing-scenario/9"}),
    );
    let out = homing(&["scenario", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // missing file
    let out = homing(&["simulate", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(out.status.code(), Some(2));

    // clap rejects unknown subcommands with its own exit 2
    let out = homing(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_runs_exit_three_but_still_report() {
    let dir = tempfile::tempdir().unwrap();
    let base = write_spec(
        dir.path(),
        "base.json",
        &serde_json::json!({"format": "homing-scenario/1", "seed": 4}),
    );
    let out = homing(&["scenario", "--spec", base.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let scene = stdout_json(&out);
    assert_eq!(scene["format"], "homing-scene/1");
    let landmark = scene["scene"]["landmarks"][0].clone();

    // a start placed on a landmark cannot take bearings: that run fails,
    // the batch still reports
    let spec = write_spec(
        dir.path(),
        "collide.json",
        &serde_json::json!({
            "format": "homing-scenario/1",
            "seed": 4,
            "starts": [landmark]
        }),
    );
    let out = homing(&["simulate", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 of 1 runs failed"));
    let summary = stdout_json(&out);
    let label = summary["runs"][0]["terminated_by"].as_str().unwrap();
    assert!(label.starts_with("failed"), "label was {label:?}");
}

#[test]
fn verify_reports_all_audits() {
    let dir = tempfile::tempdir().unwrap();
    let out = homing(&[
        "verify",
        "--seed",
        "1",
        "--cases",
        "20",
        "--pairs",
        "50",
        "--grid",
        "101",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["format"], "homing-verify/1");
    assert_eq!(report["pass"], true);
    assert!(report["gradients"]["max_rel_gradient"].as_f64().unwrap() < 1e-5);
    assert!(report["equivalence"]["max_abs_diff"].as_f64().unwrap() < 1e-10);
    assert_eq!(report["assumption"]["cosine"]["pass"], true);
    assert_eq!(report["assumption"]["angle_squared"]["pass"], true);
    assert!(dir.path().join("verify.json").exists());

    let out = homing(&["verify", "--cases", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heatmap_emits_grid_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "spec.json",
        &serde_json::json!({"format": "homing-scenario/1", "seed": 5}),
    );
    let out = homing(&[
        "heatmap",
        "--spec",
        spec.to_str().unwrap(),
        "--nx",
        "12",
        "--ny",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let map = stdout_json(&out);
    assert_eq!(map["format"], "homing-heatmap/1");
    assert_eq!(map["resolution"], serde_json::json!([12, 10]));
    assert_eq!(map["reshaping"], "cosine");
    assert_eq!(map["noise"], "projected");
    assert!(map["epsilon_mask"].as_f64().unwrap() > 0.0);
    assert_eq!(map["values"].as_array().unwrap().len(), 120);
    assert!(map["region"]["min"].is_array() && map["region"]["max"].is_array());
}

#[test]
fn sensitivity_mc_summarizes_scatter() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "spec.json",
        &serde_json::json!({"format": "homing-scenario/1", "seed": 7}),
    );
    let out = homing(&[
        "sensitivity-mc",
        "--spec",
        spec.to_str().unwrap(),
        "--trials",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["format"], "homing-sensitivity-mc/1");
    assert_eq!(report["trials"], 50);
    assert_eq!(report["noise"], "projected");
    let ratio = report["trace_ratio"].as_f64().unwrap();
    assert!(ratio > 0.5 && ratio < 2.0, "trace ratio {ratio}");
    assert_eq!(report["jacobian"].as_array().unwrap().len(), 2);
}

#[test]
fn exports_are_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "spec.json",
        &serde_json::json!({
            "format": "homing-scenario/1",
            "seed": 11,
            "params": {"record_every": 100}
        }),
    );
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&d1, &d2] {
        let out = homing(&[
            "simulate",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["run_000.csv", "run_008.csv", "summary.json"] {
        let (a, b) = (fs::read(d1.join(name)).unwrap(), fs::read(d2.join(name)).unwrap());
        assert_eq!(a, b, "{name} differs between processes");
    }
}

#[test]
fn thread_cap_env_is_validated() {
    let spec_dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        spec_dir.path(),
        "spec.json",
        &serde_json::json!({"format": "homing-scenario/1"}),
    );
    let out = Command::new(env!("CARGO_BIN_EXE_homing"))
        .args(["scenario", "--spec", spec.to_str().unwrap()])
        .env("HOMING_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HOMING_THREADS"));

    let out = Command::new(env!("CARGO_BIN_EXE_homing"))
        .args(["scenario", "--spec", spec.to_str().unwrap()])
        .env("HOMING_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
