use std::path::Path;
use std::process::Command;

use mpaudit::milp::read_mps;

fn mpaudit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpaudit"))
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, json).unwrap();
    path
}

const SEPARABILITY: &str = r#"{"data": {"source": "synthetic", "kind": "separability", "sigma": 4.0, "n_total": 60}}"#;

#[test]
fn train_writes_model_and_metrics_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SEPARABILITY);
    for out in ["a", "b"] {
        let status = mpaudit()
            .args(["--config", config.to_str().unwrap(), "--seed", "3", "--out-dir"])
            .arg(dir.path().join(out))
            .arg("train")
            .status()
            .unwrap();
        assert!(status.success());
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/metrics.json")).unwrap()).unwrap();
    assert!(metrics["train"]["auc"].as_f64().unwrap() > 0.9);
    assert!(metrics["train"]["loss"].is_number() && metrics["train"]["ece"].is_number());
    assert_eq!(
        std::fs::read(dir.path().join("a/baseline.json")).unwrap(),
        std::fs::read(dir.path().join("b/baseline.json")).unwrap()
    );
}

#[test]
fn missing_label_column_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,b\n1,2\n3,4\n").unwrap();
    let config = write_config(
        dir.path(),
        r#"{"data": {"source": "csv", "path": "d.csv", "label_column": "outcome", "positive_label": "1"}}"#,
    );
    let out = mpaudit()
        .args(["--config", config.to_str().unwrap(), "--out-dir"])
        .arg(dir.path().join("out"))
        .arg("train")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outcome"));
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"epsilon": 0.1}"#);
    let out = mpaudit()
        .args(["--config", config.to_str().unwrap(), "audit"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn node_limited_audit_is_partial() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"data": {"source": "synthetic", "kind": "separability", "sigma": 10.0, "n_total": 60},
            "milp": {"node_limit": 1}}"#,
    );
    let out_dir = dir.path().join("out");
    let status = mpaudit()
        .args(["--config", config.to_str().unwrap(), "--threads", "1", "--out-dir"])
        .arg(&out_dir)
        .arg("audit")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["exact_discrepancy"][0]["status"], "node_limit");
    assert_eq!(report["partial"], true);
    for f in ["viable_ranges.svg", "max_deviation.svg", "cells.csv", "groups.csv", "pool/pool.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn gen_synth_writes_a_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpaudit()
        .args(["gen-synth", "--kind", "majority_minority", "--sigma", "1", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let data = mpaudit::dataset::load_csv(dir.path().join("synthetic.csv"), "label", Some("group"), "1").unwrap();
    assert_eq!(data.n(), 165);
    let minority = data.groups().unwrap().iter().filter(|g| *g == "minority").count();
    assert_eq!(minority, 15);
}

#[test]
fn export_mps_writes_parseable_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SEPARABILITY);
    let out = mpaudit()
        .args(["--config", config.to_str().unwrap(), "--out-dir"])
        .arg(dir.path().join("mps"))
        .arg("export-mps")
        .output()
        .unwrap();
    assert!(out.status.success());
    let path = dir.path().join("mps/discrepancy_eps0.01_delta0.2.mps");
    let model = read_mps(&path).unwrap();
    assert!(model.maximize);
    assert!(model.binaries().count() > 0);
}

#[test]
fn replicate_one_seed_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpaudit()
        .args(["replicate", "--study", "ratio", "--n-seeds", "1", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("replicate.json")).unwrap()).unwrap();
    assert_eq!(report["studies"].as_array().unwrap().len(), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Ratio"));
}

#[test]
fn unknown_study_exits_2() {
    let out = mpaudit().args(["replicate", "--study", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
