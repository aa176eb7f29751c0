use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn korteweg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_korteweg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = korteweg(
        &[
            "run", "--preset", "exp54", "--K", "16", "--steps", "3", "--out", "out",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "timeseries.csv",
        "snap_0.csv",
        "snap_3.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let ts = fs::read_to_string(dir.path().join("out/timeseries.csv")).unwrap();
    assert_eq!(ts.lines().count(), 1 + 4);
}

#[test]
fn run_defaults_to_runs_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = korteweg(
        &["run", "--preset", "exp53", "--K", "20", "--steps", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("runs/exp53/manifest.json").exists());
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "preset": "exp52", "cells": 10, "steps": 50, "mach": 0.1}"#,
    )
    .unwrap();
    let o = korteweg(
        &["run", "--config", "cfg.json", "--steps", "2", "--out", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["config"]["steps"], 2);
    assert_eq!(m["config"]["mach"], 0.1);
    assert_eq!(m["resolved"]["cells"], 10);
    assert_eq!(m["status"], "completed");
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"schema_version": 1, "preset": "exp54", "nonsense": true}"#,
    )
    .unwrap();
    let o = korteweg(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonsense"));
    let o = korteweg(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = korteweg(
        &[
            "run", "--preset", "exp54", "--steps", "3", "--tfinal", "0.1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = korteweg(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = korteweg(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn solver_failure_exits_with_two_and_keeps_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"schema_version": 1, "preset": "exp53", "cells": 20, "steps": 5,
        "newton": {"tol_residual": 1e-16, "tol_step": 1e-30, "max_iter": 1, "linear_tol": 1e-10,
                   "line_search": true, "max_halvings": 20, "linear_solver": null}}"#;
    fs::write(dir.path().join("fail.json"), cfg).unwrap();
    let o = korteweg(&["run", "--config", "fail.json", "--out", "f"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("partial results"));
    let m = fs::read_to_string(dir.path().join("f/manifest.json")).unwrap();
    assert!(m.contains("\"solver_failure\""));
}

#[test]
fn eoc_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = korteweg(&["eoc", "--preset", "exp54", "--K", "16,32"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "K,e_rho,eoc_rho,e_v,eoc_v");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("16,"));

    let o = korteweg(
        &[
            "eoc",
            "--preset",
            "exp53",
            "--K",
            "20,40",
            "--reference",
            "finest",
            "--ref-K",
            "80",
            "--mode",
            "relative",
            "--out",
            "eoc.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(dir.path().join("eoc.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn check_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = korteweg(&["check", "--seed", "3", "--cases", "10"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    let report: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["results"][0]["cases"], 60);
}
