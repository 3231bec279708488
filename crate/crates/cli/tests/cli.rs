use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn filippov(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_filippov"));
    cmd.args(args).env_remove("FILIPPOV_OUT");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn builtins_lists_every_scenario() {
    let o = filippov(&["builtins"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert!(names.contains(&"relay_focus"));
    assert!(names.contains(&"escaping_demo"));
    assert_eq!(names.len(), filippov_cli::builtins::BUILTINS.len());
}

#[test]
fn show_applies_overrides() {
    let o = filippov(&["show", "--builtin", "relay_focus", "--set", "conley.resolution=128"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("resolution = 128"), "{text}");
    let s = filippov_cli::scenario::parse_scenario(&text).unwrap();
    assert_eq!(s.name, "relay_focus");
}

#[test]
fn simulate_writes_trajectory() {
    let dir = TempDir::new().unwrap();
    let o = filippov(&["simulate", "--builtin", "fold_visible"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trajectory_0.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    let s = summary(dir.path());
    assert_eq!(s["exitCode"], 0);
    assert_eq!(s["tasks"][0]["task"], "validate");
    assert_eq!(s["tasks"][1]["task"], "simulate");
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_filippov"))
        .args(["validate", "--builtin", "constant_sliding"])
        .env("FILIPPOV_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("validation.json").exists());
}

#[test]
fn escaping_region_fails_validation() {
    let dir = TempDir::new().unwrap();
    let o = filippov(&["pipeline", "--builtin", "escaping_demo"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert!(!dir.path().join("trajectory_0.csv").exists());
}

#[test]
fn failed_detection_is_a_task_failure() {
    let dir = TempDir::new().unwrap();
    let o = filippov(
        &["detect", "--builtin", "sliding_circle", "--set", "detect.seed=[1.9, 1.9]", "--set", "detect.tcap=0.5"],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(summary(dir.path())["tasks"][1]["status"], "failed");
}

#[test]
fn usage_and_input_errors_exit_4() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.scn");
    let cases: Vec<Vec<String>> = vec![
        vec!["frobnicate".into()],
        vec!["validate".into()],
        vec!["validate".into(), "--scenario".into(), missing.display().to_string()],
        vec!["validate".into(), "--builtin".into(), "no_such".into()],
        vec!["detect".into(), "--builtin".into(), "constant_sliding".into()],
        vec!["show".into(), "--builtin".into(), "relay_focus".into(), "--set".into(), "nosuch.key=1".into()],
    ];
    for args in cases {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = filippov(&a, None);
        assert_eq!(o.status.code(), Some(4), "{args:?}");
    }
}

#[test]
fn parse_error_reports_location() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.scn");
    fs::write(&path, "name = \"bad\"\ndimension = 2\nX = \"x1 +\"\n").unwrap();
    let o = filippov(&["validate", "--scenario", path.to_str().unwrap()], Some(dir.path()));
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn help_exits_zero() {
    assert_eq!(filippov(&["--help"], None).status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = filippov(&["pipeline", "--builtin", "sliding_circle"], Some(dir.path()));
        assert_eq!(o.status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "orbit.json"));
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}
