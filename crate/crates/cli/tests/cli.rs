use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qic")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn config() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/standard.json").display().to_string()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    let text = r#"{
        "true_model": {"model": "M1", "params": {"random": {}}},
        "candidate_models": ["M1", "M2"],
        "n_shots": 200, "trials": 2, "restarts": 1, "max_iter": 40, "master_seed": 5,
        "validation": {"replications": 20, "n_shots": 500, "bias_sweep": [], "consistency_shots": [100, 1000], "consistency_seeds": 3}
    }"#;
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = qic(&["experiment", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["summary.json", "trials.csv", "histogram.csv", "fits.json", "outcomes.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 2);
}

#[test]
fn trial_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = qic(&["trial", &cfg, "--index", "1"]);
    let b = qic(&["trial", &cfg, "--index", "1"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = qic(&["trial", &cfg, "--index", "1", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn criteria_rescoring_matches_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("t");
    let o = qic(&["trial", &cfg, "--index", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("trial_0.json")).unwrap()).unwrap();
    let o = qic(&[
        "criteria",
        "--fit",
        out.join("fits.json").to_str().unwrap(),
        "--outcomes",
        out.join("outcomes.csv").to_str().unwrap(),
        "--config",
        &cfg,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rescored: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rescored[0]["reports"], record["reports"]);
    assert_eq!(rescored[0]["selections"], record["selections"]);
}

#[test]
fn validations_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for cmd in ["validate-bias", "validate-normality", "validate-consistency"] {
        let o = qic(&[cmd, &cfg]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v["model"].as_str().unwrap().starts_with("M1"), "{cmd}");
        assert!(!v["theta0"].as_array().unwrap().is_empty(), "{cmd}");
    }
}

#[test]
fn selfcheck_succeeds() {
    let o = qic(&["selfcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn bad_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = qic(&["experiment", &config(), "--trials", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`trials`"), "{}", stderr(&o));

    let o = qic(&["trial", &config(), "--index", "0", "--shots", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`n_shots`"), "{}", stderr(&o));

    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"master_seed": 1, "bogus": 2}"#).unwrap();
    let o = qic(&["experiment", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    std::fs::write(&path, r#"{"true_model": {"model": "M1", "params": {"explicit": [0.1]}}, "candidate_models": ["M1"], "master_seed": 1}"#).unwrap();
    let o = qic(&["experiment", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`true_model.params`"), "{}", stderr(&o));
}

#[test]
fn trial_index_out_of_range_fails() {
    let o = qic(&["trial", &config(), "--index", "50"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--index"));
}
