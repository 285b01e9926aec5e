//! End-to-end checks of the binary: subcommand behavior and exit codes.

use std::path::Path;
use std::process::Command;

fn kcagg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kcagg"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn simulate_writes_the_declared_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m5.csv");
    let status = kcagg()
        .args(["simulate", "--model", "5", "--seed", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 21); // x1..x20, y
    assert_eq!(lines.count(), 700);
}

#[test]
fn run_executes_an_experiment_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "source": {"type": "synthetic", "id": 1},
            "learners": ["knn"],
            "schemes": [{"name": "kernel", "kernel": "gaussian"}],
            "replications": 1,
            "seed": 9
        }"#,
    );
    let out = dir.path().join("results.json");
    let status = kcagg()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["columns"].as_array().unwrap().len(), 2);
    assert_eq!(parsed["metric"], "mse");
}

#[test]
fn run_consumes_simulated_csv_and_defaults_to_rmse() {
    // simulate -> run round trip through the CSV source path.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m1.csv");
    let status = kcagg()
        .args(["simulate", "--model", "1", "--seed", "1", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());

    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
                "source": {{"type": "csv", "path": {:?}, "target": "y"}},
                "learners": ["tree"],
                "schemes": [{{"name": "kernel", "kernel": "gaussian"}}],
                "replications": 1,
                "seed": 4
            }}"#,
            data.to_str().unwrap()
        ),
    );
    let output = kcagg().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8(output.stdout).unwrap()).unwrap();
    assert_eq!(parsed["metric"], "rmse");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // Missing file.
    let status = kcagg()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Unparseable config.
    let cfg = dir.path().join("broken.json");
    write(&cfg, "{ not json");
    let status = kcagg().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // Unknown learner name.
    write(
        &cfg,
        r#"{"source": {"type": "synthetic", "id": 1}, "learners": ["blorp"],
            "schemes": [{"name": "kernel"}]}"#,
    );
    let status = kcagg().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn replication_failures_above_threshold_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // Six rows split into (3, 2, 1); two aggregation rows cannot carry the
    // default five CV folds, so every replication fails.
    let data = dir.path().join("tiny.csv");
    write(&data, "a,y\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
                "source": {{"type": "csv", "path": {:?}, "target": "y"}},
                "learners": ["knn"],
                "schemes": [{{"name": "kernel", "kernel": "gaussian"}}],
                "replications": 2,
                "seed": 1
            }}"#,
            data.to_str().unwrap()
        ),
    );
    let status = kcagg().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn validate_reports_every_suite() {
    let output = kcagg().args(["validate", "--seed", "1"]).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    for name in [
        "weights-normalization",
        "cobra-full-vs-relaxed",
        "cv-fold-oracle",
        "knn-brute-force",
        "analytic-vs-numerical-gradient",
    ] {
        assert!(text.contains(name), "missing suite {name} in:\n{text}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn time_reports_both_optimizers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        r#"{
            "source": {"type": "synthetic", "id": 1},
            "learners": ["knn", "tree"],
            "schemes": [{"name": "kernel", "kernel": "gaussian"}],
            "replications": 1,
            "seed": 2
        }"#,
    );
    let output = kcagg().args(["time", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8(output.stdout).unwrap()).unwrap();
    for field in ["gd_seconds", "grid_seconds", "gd_h", "grid_h", "gd_cv_error", "grid_cv_error"] {
        assert!(parsed[field].is_number(), "missing {field}");
    }
}
