//! End-to-end checks of the binary: exit discipline, report formats, and
//! byte-level determinism across runs and thread counts.

use std::path::Path;
use std::process::{Command, Output};

fn uirisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uirisk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn uirisk_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uirisk"))
        .args(args)
        .env("UIRISK_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_a1(dir: &Path) -> String {
    let path = dir.join("a1.json");
    std::fs::write(
        &path,
        r#"{"atoms": [-1.0, 6.0], "weights": [0.9166666666666666, 0.08333333333333333]}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_es_clip_on_the_two_atom_law() {
    let dir = tempfile::tempdir().unwrap();
    let a1 = write_a1(dir.path());
    let out = uirisk(&[
        "risk",
        "eval",
        "--measure",
        r#"{"kind":"es_clip","p":0.75}"#,
        "--dist",
        &a1,
    ]);
    let report = stdout_json(&out);
    let value = report["value"].as_f64().unwrap();
    assert!((value - 4.0 / 3.0).abs() < 1e-14, "{value}");
}

#[test]
fn gallery_reports_infinite_ratios() {
    let out = uirisk(&["gallery"]);
    let entries = stdout_json(&out);
    let entries = entries.as_array().unwrap();
    let infinite: Vec<&serde_json::Value> = entries
        .iter()
        .filter(|e| e["report"]["ratio"] == serde_json::json!("inf"))
        .collect();
    assert_eq!(infinite.len(), 2, "scenario and capacity examples");
    for e in infinite {
        assert_eq!(e["report"]["components"]["plus"], serde_json::json!(0.0));
        assert_eq!(e["report"]["components"]["minus"], serde_json::json!(0.0));
        assert_eq!(e["report"]["components"]["abs"], serde_json::json!(1.0));
    }
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "fold",
        "score",
        "--measure",
        r#"{"kind":"power","alpha":0.5}"#,
        "--search",
        "k=3,iters=2000,seed=11",
    ];
    let first = uirisk(&args);
    let second = uirisk(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let single_thread = uirisk_with_threads(&args, "1");
    assert_eq!(first.stdout, single_thread.stdout, "thread count leaks into report");
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("envelopes.csv");
    let base = [
        "ui", "check", "--family", "nbern", "--horizon", "400", "--grid", "dyadic:8", "--format",
        "csv",
    ];
    let streamed = uirisk(&base);
    assert!(streamed.status.success());
    let mut with_out: Vec<&str> = base.to_vec();
    with_out.push("--out");
    with_out.push(path.to_str().unwrap());
    let written = uirisk(&with_out);
    assert!(written.status.success());
    assert!(written.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), streamed.stdout);
}

#[test]
fn envelope_csv_shape() {
    let out = uirisk(&[
        "ui", "check", "--family", "nbern", "--horizon", "1e4", "--grid", "dyadic:13",
        "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.split("\r\n").collect();
    assert_eq!(lines[0], "p,env_abs,env_pos,env_neg");
    assert_eq!(lines.len(), 15, "header + 13 rows + trailing empty");
    assert_eq!(lines[14], "");
    for row in &lines[1..14] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[1], "1", "spike family envelope is identically one");
    }
}

#[test]
fn lln_csv_header_matches_the_interface() {
    let out = uirisk(&[
        "conv", "lln", "--gen", "coin", "--nmax", "64", "--reps", "20", "--seed", "7",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,exceed_0.1,exceed_0.05,rho_env,rhoprime_env\r\n"));
}

#[test]
fn solve_emits_monotone_quantiles() {
    let out = uirisk(&["invest", "solve", "--eps", "1e-3", "--seed", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut prev_level = f64::NEG_INFINITY;
    let mut prev_q = f64::NEG_INFINITY;
    let mut rows = 0;
    for line in text.split("\r\n").skip(1).filter(|l| !l.is_empty()) {
        let (level, q) = line.split_once(',').unwrap();
        let level: f64 = level.parse().unwrap();
        let q: f64 = q.parse().unwrap();
        assert!(level > prev_level && (0.0..1.0).contains(&level));
        assert!(q >= prev_q - 1e-12, "quantile column must be non-decreasing");
        prev_level = level;
        prev_q = q;
        rows += 1;
    }
    assert_eq!(rows, 50, "default instance grid size");
}

#[test]
fn shift_scheme_error_is_the_shift_size() {
    let dir = tempfile::tempdir().unwrap();
    let a1 = write_a1(dir.path());
    let out = uirisk(&[
        "conv", "es", "--target", &a1, "--scheme", "shift", "--steps", "4", "--ps", "0.5,0.9",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (i, line) in text.split("\r\n").skip(1).filter(|l| !l.is_empty()).enumerate() {
        let n = (i + 1) as f64;
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], n);
        assert!((fields[1] - 1.0 / n).abs() < 1e-12);
        assert!((fields[2] - 1.0 / n).abs() < 1e-12);
    }
}

#[test]
fn validation_failures_exit_two_with_one_line() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["frobnicate"],
        vec!["risk", "eval", "--measure", r#"{"kind":"es_clip","p":1.5}"#, "--cells", "1,2"],
        vec!["risk", "eval", "--measure", r#"{"kind":"#, "--cells", "1,2"],
        vec!["ui", "check", "--family", "no-such-family"],
        vec!["ui", "check", "--family", "nbern", "--grid", "linear:5"],
        vec!["conv", "lln", "--gen", "pareto:0.5"],
        vec!["invest", "solve", "--spec", "/nonexistent/prob.json"],
        vec![],
    ];
    for args in cases {
        let out = uirisk(&args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "args {args:?} gave {err:?}");
        assert!(err.starts_with("error: "), "{err:?}");
    }
}

#[test]
fn threads_env_must_be_a_positive_integer() {
    for bad in ["banana", "0", "-3"] {
        let out = uirisk_with_threads(&["gallery"], bad);
        assert_eq!(out.status.code(), Some(2), "UIRISK_THREADS={bad}");
    }
    let ok = uirisk_with_threads(&["gallery"], "2");
    assert!(ok.status.success());
}
