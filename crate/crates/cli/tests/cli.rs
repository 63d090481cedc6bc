use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spt-mbqc")).current_dir(dir).args(args).output().expect("binary runs")
}

#[test]
fn build_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["model", "build", "--group", "Z3xZ3", "--name", "d3.json"]).status.success());
    let out = run(dir.path(), &["model", "validate", "d3.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("d3.json").exists());
}

#[test]
fn invalid_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["model", "build", "--name", "m.json"]).status.success());
    let text = std::fs::read_to_string(dir.path().join("m.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["schema"] = serde_json::Value::from("spt-mbqc/999");
    std::fs::write(dir.path().join("bad.json"), json.to_string()).unwrap();
    assert_eq!(run(dir.path(), &["model", "validate", "bad.json"]).status.code(), Some(2));
    std::fs::write(dir.path().join("junk.json"), "{ not json").unwrap();
    assert_eq!(run(dir.path(), &["model", "validate", "--model", "junk.json"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["run", "teleport"]).status.code(), Some(4));
    assert_eq!(run(dir.path(), &["run", "wire"]).status.code(), Some(4));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn failed_conformance_exits_3_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["model", "perturb", "--name", "m.json"]).status.success());
    let out = run(dir.path(), &["--tol", "1e-300", "run", "conform", "--model", "m.json", "--n", "4"]);
    assert_eq!(out.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("run-conform.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.ends_with("false")));
    assert!(dir.path().join("run-conform.manifest.json").exists());
}

#[test]
fn manifest_cites_output_digests() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["run", "filter", "--grid", "32"]).status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run-filter.manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let bytes = std::fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
        assert!(!bytes.is_empty());
    }
    assert_eq!(manifest["seed"], 0);
}
