use std::path::PathBuf;
use std::process::Command;

use around_cli::report::{listener_from_csv, speaker_from_csv, RunReport};
use around_cli::main_with;

fn paper_toml() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper.toml")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with(std::iter::once("around").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn shipped_scenario_matches_builtin() {
    let text = std::fs::read_to_string(paper_toml()).unwrap();
    assert_eq!(around_core::load_scenario(&text).unwrap(), around_core::paper_scenario());
}

#[test]
fn invalid_scenario_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lambda = 1.0\ndepth = \"deep\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_around"))
        .args(["run", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_file_is_config_error() {
    let (code, _, err) = run(&["run", "/nonexistent/scenario.toml"]);
    assert_eq!(code, 2);
    assert!(err.contains("cannot read"));
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(run(&["run", paper_toml().to_str().unwrap(), "--format", "xml"]).0, 2);
    assert_eq!(run(&["check", "--trials", "0"]).0, 2);
    assert_eq!(run(&["run", paper_toml().to_str().unwrap(), "--depth", "0"]).0, 2);
}

#[test]
fn csv_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let p = paper_toml();
    let (code, _, err) = run(&["run", p.to_str().unwrap(), "--depth", "3", "--format", "csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (_, json, _) = run(&["run", p.to_str().unwrap(), "--depth", "3", "--format", "json"]);
    let report: RunReport = serde_json::from_str(&json).unwrap();
    for level in &report.levels {
        let s = std::fs::read_to_string(dir.path().join(format!("S{}.csv", level.level))).unwrap();
        assert_eq!(speaker_from_csv(&s).unwrap(), level.speaker);
        let l = std::fs::read_to_string(dir.path().join(format!("L{}.csv", level.level))).unwrap();
        assert_eq!(listener_from_csv(&l).unwrap(), level.listener);
    }
    let l0 = std::fs::read_to_string(dir.path().join("L0.csv")).unwrap();
    assert_eq!(&listener_from_csv(&l0).unwrap(), report.literal.as_ref().unwrap());
}

#[test]
fn json_round_trips() {
    let p = paper_toml();
    let (code, json, _) = run(&["run", p.to_str().unwrap(), "--depth", "2", "--format", "json"]);
    assert_eq!(code, 0);
    let report: RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", json);
    assert_eq!(around_core::load_scenario(&report.scenario).unwrap(), around_core::paper_scenario());
}

#[test]
fn depth_one_emits_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = paper_toml();
    let (code, _, _) = run(&["run", p.to_str().unwrap(), "--depth", "1", "--format", "csv", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["L0.csv", "L1.csv", "S1.csv"]);
}

#[test]
fn out_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_around"))
        .args(["run", paper_toml().to_str().unwrap(), "--depth", "1", "--format", "json"])
        .env(around_cli::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn runs_are_byte_identical() {
    let p = paper_toml();
    for format in ["table", "csv", "json"] {
        let a = run(&["run", p.to_str().unwrap(), "--format", format]);
        let b = run(&["run", p.to_str().unwrap(), "--format", format]);
        assert_eq!(a, b);
    }
}

#[test]
fn lu_run_has_no_literal_table() {
    let (code, out, _) = run(&["run", paper_toml().to_str().unwrap(), "--model", "lu", "--depth", "1", "--format", "csv"]);
    assert_eq!(code, 0);
    assert!(!out.contains("# L0"));
    assert!(out.contains("# S1") && out.contains("# L1"));
}

#[test]
fn compare_needs_two_models() {
    let (code, _, err) = run(&["compare", paper_toml().to_str().unwrap(), "--models", "main"]);
    assert_eq!(code, 2);
    assert!(err.contains("two distinct models"));
}

#[test]
fn compare_reports_differentiation() {
    let (code, out, _) = run(&["compare", paper_toml().to_str().unwrap(), "--models", "main,lu", "--depth", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("main: differentiates"));
    assert!(out.contains("lu: does not differentiate"));
}

#[test]
fn paper_tables_pass_and_write_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["paper-tables", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("12/12 tables pass"));
    let curve = std::fs::read_to_string(dir.path().join("around-20-bayesian.csv")).unwrap();
    assert_eq!(curve.lines().count(), 42);
}

#[test]
fn check_small_suites_pass() {
    let (code, out, _) = run(&["check", "--suite", "ratio", "--trials", "50", "--seed", "7"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("ratio: PASS"));
    assert!(out.contains("between-control: PASS"));
}
