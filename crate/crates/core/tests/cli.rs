use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn equidist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_equidist")).args(args).output().expect("spawn equidist")
}

fn json_ok(args: &[&str]) -> Value {
    let out = equidist(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], "1.0");
    v
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(equidist(&["--help"]).status.code(), Some(0));
    assert_eq!(equidist(&[]).status.code(), Some(1));
    assert_eq!(equidist(&["sieve-equidist", "--x", "ten"]).status.code(), Some(1));
}

#[test]
fn domain_errors_are_json_on_stderr() {
    let out = equidist(&["check-criterion", "--preset", "tau", "--q", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["schema_version"], "1.0");
    assert!(e["error"]["code"].is_string());
    assert!(e["error"]["message"].is_string());

    let out = equidist(&["sieve-equidist", "--preset", "phi", "--x", "100", "--q", "1000000"]);
    assert_eq!(out.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["code"], "MODULUS_TOO_LARGE");
    let out = equidist(&["sieve-equidist", "--preset", "phi", "--x", "100", "--q", "0"]);
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(e["error"]["code"], "INVALID_INPUT");
}

#[test]
fn check_criterion_verdicts() {
    let v = json_ok(&["check-criterion", "--preset", "sigma", "--q", "10"]);
    assert_eq!(v["command"], "check-criterion");
    assert_eq!(v["status"], "IN");
    assert_eq!(v["k"], 2);
    let v = json_ok(&["check-criterion", "--preset", "phi", "--q", "3"]);
    assert_eq!(v["status"], "OUT");
}

#[test]
fn analyze_modulus_rationals() {
    let v = json_ok(&["analyze-modulus", "--preset", "sigma", "--q", "4"]);
    assert_eq!(v["alpha_k"], serde_json::json!({"num": 1, "den": 1}));
    let alpha = v["alpha"].as_array().unwrap();
    assert_eq!(alpha[0]["alpha"]["num"], 0);
}

#[test]
fn count_congruences_agrees() {
    let v = json_ok(&["count-congruences", "--preset", "sigma", "--q", "7", "--n", "3", "--targets", "1"]);
    assert_eq!(v["exact_count"], 20);
    assert_eq!(v["charsum_count"], serde_json::json!({"num": 20, "den": 1}));
    assert_eq!(v["agree"], true);
}

#[test]
fn sieve_report_and_csv() {
    let csv = tmp("phi5.csv");
    let x = csv.to_str().unwrap();
    let v = json_ok(&["sieve-equidist", "--preset", "phi", "--x", "10000", "--q", "5", "--csv", x]);
    assert_eq!(v["coprime_total"], 6548);
    let sum: u64 = v["counts"].as_array().unwrap().iter().map(|c| c["count"].as_u64().unwrap()).sum();
    assert_eq!(sum, 6548);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["a1,count", "1,1775", "2,1874", "3,1573", "4,1326"]);
}

#[test]
fn out_flag_writes_file() {
    let path = tmp("sweep.json");
    let out = equidist(&["--out", path.to_str().unwrap(), "classification-sweep", "--preset", "phi", "--qmax", "30"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["contradictions"], 0);
    assert_eq!(v["unknown"], 0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 30);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sieve-equidist", "--preset", "phi_sigma_joint", "--x", "200000", "--q", "7"];
    let a = equidist(&[&["--threads", "1"][..], &args].concat());
    let b = equidist(&[&["--threads", "3"][..], &args].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seeded_bounds_are_reproducible() {
    let args = ["verify-bounds", "--kind", "weil", "--ell-max", "30", "--random", "4"];
    let a = json_ok(&[&["--seed", "11"][..], &args].concat());
    let b = json_ok(&[&["--seed", "11"][..], &args].concat());
    assert_eq!(a, b);
    assert_eq!(a["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn counterexample_and_control() {
    let v = json_ok(&["counterexample", "--kind", "eisenstein_family", "--x", "100000"]);
    assert_eq!(v["q"], 143);
    assert!(v["observed_ratio"].as_f64().unwrap() > 2.0);
    let c = json_ok(&["counterexample", "--kind", "eisenstein_family", "--x", "100000", "--control"]);
    assert_eq!(c["q"], 143);
    assert_eq!(c["control"]["q"], 149);
    assert!((c["control"]["observed_ratio"].as_f64().unwrap() - 1.0).abs() < 0.5);
}

#[test]
fn spec_file_family() {
    let path = tmp("sigma.toml");
    std::fs::write(&path, "name = \"my_sigma\"\nV = 2\n[[functions]]\nw = [[1, 1], [1, 1, 1]]\n").unwrap();
    let v = json_ok(&["check-criterion", "--spec", path.to_str().unwrap(), "--q", "5"]);
    assert_eq!(v["family"], "my_sigma");
    assert_eq!(v["status"], "IN");
}
