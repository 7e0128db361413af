use std::path::Path;
use std::process::{Command, Output};

fn scalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalc")).args(args).env("SCALC_WORKERS", "2").output().expect("scalc runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn verify_all_on_constant_coefficients_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = scalc(&[
        "verify-all",
        "--preset",
        "t1",
        "--points",
        "64",
        "--samples",
        "4",
        "--refine",
        "32",
        "--refine",
        "64",
        "--output",
        out,
    ]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(code(&run), 0, "{stdout}\n{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("verify-all passed"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "pass");
    assert_eq!(report["config"]["seed"], 2024);
    assert!(report["checks"].as_array().unwrap().len() > 40);
    assert!(Path::new(&dir.path().join("curves")).read_dir().unwrap().count() > 0);
}

#[test]
fn missing_coefficient_file_is_a_config_error() {
    let run = scalc(&["operator-check", "--coefficients", "/definitely/not/here.scalc"]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stdout).contains("cannot read coefficient file"));
}

#[test]
fn exponent_below_floor_is_rejected() {
    let run = scalc(&["solve", "dirichlet", "--exponent", "0.4"]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("1_*"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&scalc(&["frobnicate"])), 2);
    assert_eq!(code(&scalc(&["probe", "sideways"])), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"grid": {"points": 32}, "colour": "blue"}"#).unwrap();
    let run = scalc(&["operator-check", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    // Rounding alone exceeds this adjointness tolerance.
    std::fs::write(&path, r#"{"grid": {"points": 32}, "tolerances": {"adjointness": 1e-300}}"#).unwrap();
    let run = scalc(&["operator-check", "--config", path.to_str().unwrap(), "--preset", "t2"]);
    assert_eq!(code(&run), 1, "{}", String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL"));
}

#[test]
fn printed_config_reloads_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = scalc(&["probe", "kato", "--points", "32", "--seed", "9", "--preset", "t3", "--print-config"]);
    assert_eq!(code(&first), 0);
    let path = dir.path().join("echo.json");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = scalc(&["probe", "kato", "--config", path.to_str().unwrap(), "--print-config"]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["probe", "offdiag", "--points", "32", "--preset", "t2", "--json"];
    let a = scalc(&args);
    let b = scalc(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
