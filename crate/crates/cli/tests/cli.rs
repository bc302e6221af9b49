use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const DUMMY: &str = r#"
schema_version = 1
seed = 11
goal = "always-nonzero"
strategies = ["first-nonzero"]
samples = 500

[family]
kind = "dirac-singletons"
action = 2
"#;

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_foresight"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn dummy_mdp_checks_pass() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, DUMMY);
    let out = run(Some(&cfg), &["mdp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["status"], "pass");
    assert_eq!(v["command"], "mdp");
}

#[test]
fn dummy_trees_are_single_branches() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, DUMMY);
    let v = json(&run(Some(&cfg), &["sample-tree"]));
    for g in v["result"]["generations"].as_array().unwrap() {
        assert_eq!(g["mean_size"], 1.0);
        assert_eq!(g["stderr"], 0.0);
    }
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace("dirac-singletons\"\naction = 2", "example45\""));
    let a = run(Some(&cfg), &["--workers", "1", "sample-tree"]);
    let b = run(Some(&cfg), &["--workers", "3", "sample-tree"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_override_changes_the_report_and_hash() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace("dirac-singletons\"\naction = 2", "example42\""));
    let a = json(&run(Some(&cfg), &["sample-tree"]));
    let b = json(&run(Some(&cfg), &["--seed", "12", "sample-tree"]));
    assert_eq!(a["seed"], 11);
    assert_eq!(b["seed"], 12);
    assert_ne!(a["config_hash"], b["config_hash"]);
}

#[test]
fn empty_roster_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace(r#"strategies = ["first-nonzero"]"#, "strategies = []"));
    assert_eq!(run(Some(&cfg), &["estimate"]).status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{DUMMY}\n[tolerances]\nsigma = 2.0\n"));
    let out = run(Some(&cfg), &["sample-tree"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn missing_seed_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace("seed = 11\n", ""));
    assert_eq!(run(Some(&cfg), &["sample-tree"]).status.code(), Some(2));
    assert_eq!(run(None, &["example", "e42"]).status.code(), Some(2));
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace("schema_version = 1", "schema_version = 9"));
    assert_eq!(run(Some(&cfg), &["check"]).status.code(), Some(2));
}

#[test]
fn check_reports_the_applicable_laws() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &DUMMY.replace("dirac-singletons\"\naction = 2", "example45\""));
    let v = json(&run(Some(&cfg), &["check"]));
    assert_eq!(v["result"]["verdicts"]["dominance"]["verdict"], false);
    assert_eq!(v["result"]["verdicts"]["lamperti"]["verdict"], true);
    let labels: Vec<&str> = v["result"]["applicable"].as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
    assert_eq!(labels.len(), 1);
    assert!(labels[0].starts_with("Lamperti dominance"));

    let cfg = write_config(&dir, DUMMY);
    let v = json(&run(Some(&cfg), &["check"]));
    let labels = v["result"]["applicable"].as_array().unwrap();
    assert!(labels.iter().any(|l| l.as_str().unwrap().starts_with("Kolmogorov")));
}

#[test]
fn example_battery_passes() {
    let out = run(None, &["example", "e45", "--seed", "3", "--samples", "4000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["result"]["pass"], true);
}

#[test]
fn csv_output_is_written_to_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, DUMMY);
    let path = dir.path().join("out.csv");
    let out = run(Some(&cfg), &["--format", "csv", "--out", path.to_str().unwrap(), "check"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["condition", "verdict", "detail"]);
    assert!(r.records().count() >= 5);
}

#[test]
fn table2_matches_expected_pattern() {
    let out = run(None, &["table2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["rows"].as_array().unwrap().len(), 3);
}
