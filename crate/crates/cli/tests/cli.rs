use std::process::{Command, Output};

use serde_json::Value;

fn slicekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicekit")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

const BALL3: &str = r#"{"type":"ball","dim":3}"#;

#[test]
fn verify_eq4_on_the_ball_passes() {
    let out = slicekit(&["verify", "--ineq", "eq4", "--body", BALL3, "--density", "uniform", "--level", "32"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!((r["lhs"].as_f64().unwrap() - 4.188790).abs() < 1e-6);
    assert_eq!(r["pass"], true);
    assert_eq!(r["inequalityId"], "eq4-thm1");
    assert!(r.get("timestamp").is_none());
}

#[test]
fn verify_eq2_on_the_ball_is_an_equality() {
    let out = slicekit(&["verify", "--ineq", "eq2", "--body", BALL3]);
    assert_eq!(code(&out), 0);
    assert!((json(&out)["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn unknown_inequality_is_a_usage_error() {
    let out = slicekit(&["verify", "--ineq", "eq9"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("eq9"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&slicekit(&["verify", "--ineq", "eq4", "--body", BALL3, "--frobnicate"])), 2);
}

#[test]
fn missing_field_is_a_data_error_naming_it() {
    let out = slicekit(&["verify", "--ineq", "eq4", "--body", r#"{"type":"lp-ball","dim":3}"#]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"p\""));
}

#[test]
fn malformed_json_and_unknown_type_are_data_errors() {
    assert_eq!(code(&slicekit(&["verify", "--ineq", "eq4", "--body", r#"{"type":"ball","dim":"#])), 3);
    assert_eq!(code(&slicekit(&["verify", "--ineq", "eq4", "--body", r#"{"type":"torus","dim":3}"#])), 3);
}

#[test]
fn non_convex_body_is_a_capability_error() {
    let out = slicekit(&["verify", "--ineq", "eq4", "--body", r#"{"type":"lp-ball","dim":3,"p":0.5}"#]);
    assert_eq!(code(&out), 4);
}

#[test]
fn product_grid_in_high_dimension_is_a_capability_error() {
    let out = slicekit(&["verify", "--ineq", "eq4", "--body", "ball", "--dim", "8", "--scheme", "gauss"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn radon_selftest_passes() {
    let out = slicekit(&["radon-selftest", "--dim", "3", "--level", "32"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    let selfdual = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "selfdual-coordinate-squares").unwrap();
    assert!(selfdual["value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn output_is_byte_stable_and_thread_independent() {
    let base =
        ["verify", "--ineq", "eq4", "--body", "h-polytope", "--dim", "3", "--density", "gaussian", "--level", "12"];
    let one = slicekit(&[&base[..], &["--threads", "1"]].concat());
    let two = slicekit(&[&base[..], &["--threads", "2"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(one.stdout, slicekit(&base).stdout);
}

#[test]
fn timestamps_only_on_request() {
    let out = slicekit(&["verify", "--ineq", "eq2", "--body", BALL3, "--level", "8", "--timestamps"]);
    assert!(json(&out)["timestamp"].is_string());
}

#[test]
fn out_flag_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = slicekit(&[
        "verify",
        "--ineq",
        "eq4",
        "--body",
        BALL3,
        "--level",
        "16",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "id");
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[0], "eq4-thm1");
    assert_eq!(&row[row.len() - 1], "true");
}

#[test]
fn body_file_and_at_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.json");
    std::fs::write(&path, r#"{"type":"cube","dim":2,"halfwidth":1.0}"#).unwrap();
    let p = path.to_str().unwrap();
    let a = slicekit(&["bodies", "--body", p, "--level", "256"]);
    let b = slicekit(&["bodies", "--body", &format!("@{p}"), "--level", "256"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!((json(&a)["volume"].as_f64().unwrap() - 4.0).abs() < 1e-3);
}

#[test]
fn stability_default_density_passes() {
    let out = slicekit(&["stability", "--body", "lp-ball(3)", "--dim", "3", "--level", "16"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!(r["lhs13"].as_f64().unwrap() <= r["rhs13"].as_f64().unwrap());
}

#[test]
fn density_below_one_violates_the_stability_precondition() {
    let out = slicekit(&["stability", "--body", BALL3, "--density", "gaussian", "--level", "8"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oracle_agrees_with_quadrature() {
    let out = slicekit(&["oracle", "--body", BALL3, "--density", "gaussian", "--samples", "200000"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn small_suite_is_csv() {
    let out = slicekit(&["suite", "--dims", "2-2"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("id,n,body,density"));
    assert_eq!(text.lines().count(), 1 + 7 * 4);
}
