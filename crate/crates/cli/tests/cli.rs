//! End-to-end checks of the command-line driver: exit codes, artifact
//! outputs and determinism of the recorded runs.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_benard"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("benard-cli-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"{
  "version": 1,
  "grid": { "nx": 16, "ny": 16, "nz": 8, "l1": 1.0, "l2": 1.0 },
  "time": { "t_final": 0.01, "dt": 0.0025, "scheme": "backward-euler" },
  "geometry": { "epsilon": 1.0, "delta": 0.5 },
  "solver": { "tol": 1e-10, "max_iter": 800, "restart": 60 },
  "picard": { "max_sweeps": 2, "min_sweeps": 2, "tol_fixed_point": 1e-30 },
  "initial_data": { "preset": "perturbed-equilibrium", "amplitude": 0.01 }
}"#;

#[test]
fn check_suite_passes_with_exit_zero() {
    let dir = temp_dir("check");
    let out = bin().args(["check", "--out"]).arg(&dir).output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("check.json")).unwrap()).unwrap();
    assert_eq!(doc["pass"], serde_json::Value::Bool(true));
}

#[test]
fn malformed_config_exits_2_with_one_line_error() {
    let dir = temp_dir("badcfg");
    let cfg = write_config(&dir, "{ this is not json");
    let out = bin()
        .args(["picard", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "stderr: {err}");
}

#[test]
fn invalid_schedule_exits_2() {
    let dir = temp_dir("badtime");
    let cfg = write_config(
        &dir,
        &SMALL_RUN.replace("\"t_final\": 0.01", "\"t_final\": 0.001"),
    );
    let out = bin()
        .args(["picard", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_geometry_exits_4() {
    // an eta mode that pulls the surface to the bottom makes J negative
    let dir = temp_dir("degenerate");
    let cfg = write_config(
        &dir,
        r#"{
  "version": 1,
  "grid": { "nx": 16, "ny": 16, "nz": 8, "l1": 1.0, "l2": 1.0 },
  "time": { "t_final": 0.01, "dt": 0.0025 },
  "geometry": { "epsilon": 1.0, "delta": 0.5 },
  "solver": { "tol": 1e-10, "max_iter": 800, "restart": 60 },
  "picard": { "max_sweeps": 2, "min_sweeps": 1, "tol_fixed_point": 1e-30 },
  "initial_data": { "eta_modes": [ { "m1": 0, "m2": 0, "re": -0.95 } ] }
}"#,
    );
    let out = bin()
        .args(["picard", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn picard_writes_records_and_checkpoint_deterministically() {
    let dir1 = temp_dir("det1");
    let dir2 = temp_dir("det2");
    for dir in [&dir1, &dir2] {
        let cfg = write_config(dir, SMALL_RUN);
        let out = bin()
            .args(["picard", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let rec1 = std::fs::read(dir1.join("records.jsonl")).unwrap();
    let rec2 = std::fs::read(dir2.join("records.jsonl")).unwrap();
    assert_eq!(rec1, rec2, "records must be bit-identical across runs");
    let ck1 = std::fs::read(dir1.join("state.ckpt")).unwrap();
    let ck2 = std::fs::read(dir2.join("state.ckpt")).unwrap();
    assert_eq!(ck1, ck2, "checkpoints must be bit-identical across runs");

    // report consumes the checkpoint
    let cfg = write_config(&dir1, SMALL_RUN);
    let out = bin()
        .args(["report", "--checkpoint"])
        .arg(dir1.join("state.ckpt"))
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&dir1)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir1.join("report.json").exists());
}

#[test]
fn equilibrium_picard_reports_fixed_point() {
    let dir = temp_dir("equilibrium");
    let out = bin()
        .args(["picard", "--preset", "equilibrium", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let records = std::fs::read_to_string(dir.join("records.jsonl")).unwrap();
    for line in records.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["n_dist"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn init_data_prints_residual_json() {
    let dir = temp_dir("initdata");
    let out = bin()
        .args(["init-data", "--preset", "equilibrium", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("init-data.json")).unwrap())
            .unwrap();
    assert!(doc["compatibility"][0]["total"].as_f64().unwrap() <= 1e-10);
}
