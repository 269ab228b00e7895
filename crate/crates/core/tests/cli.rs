//! The `rpinv` binary: subcommands, exit codes and the diagnostic line.

use std::process::{Command, Output};

use rpinv::bench::cli::diagnose;
use rpinv::bench::read_csv_rows;

fn rpinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpinv")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn table1_miniature_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = (0..2).map(|i| dir.path().join(format!("t1_{i}.csv")).display().to_string()).collect();
    for (path, threads) in paths.iter().zip(["1", "3"]) {
        let out = rpinv(&["table1", "--trials", "5", "--seed", "42", "--out", path, "--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = std::fs::read(&paths[0]).unwrap();
    assert_eq!(first, std::fs::read(&paths[1]).unwrap());
    let (config, rows) = read_csv_rows(&String::from_utf8(first).unwrap()).unwrap();
    assert_eq!(config.trials, Some(5));
    assert_eq!(config.seed, 42);
    assert!(rows.iter().all(|r| r.trials == 5));
}

#[test]
fn diagnose_reports_the_spectrum_of_that_seed() {
    let out = rpinv(&["diagnose", "--alpha", "-0.5", "--beta", "-0.5", "--N", "5", "--n", "25", "--seed", "7", "--format", "json"]);
    assert!(out.status.success());
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let direct = diagnose(-0.5, -0.5, 5, 25, 7).unwrap();
    assert_eq!(printed["lambda_min"].as_f64(), Some(direct.lambda_min));
    assert_eq!(printed["lambda_max"].as_f64(), Some(direct.lambda_max));
    assert_eq!(printed["kappa2"].as_f64(), Some(direct.kappa2));
    assert_eq!(printed["condition1_ok"].as_bool(), direct.condition1_ok);
    assert!((direct.kappa2 - direct.lambda_max / direct.lambda_min).abs() <= 1e-12 * direct.kappa2);
}

#[test]
fn fit_series_writes_model_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let mut text = String::from("date,location,new_cases\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    for k in 0..400 {
        let d = start + chrono::Duration::days(k);
        text.push_str(&format!("{},Italy,{}\n", d.format("%Y-%m-%d"), 500 + (k % 7) * 10));
    }
    std::fs::write(&csv, text).unwrap();
    let (model, plot) = (dir.path().join("model.json"), dir.path().join("plot.csv"));
    let out = rpinv(&[
        "fit-series",
        "--csv",
        csv.to_str().unwrap(),
        "--location",
        "Italy",
        "--N",
        "40",
        "--model",
        model.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(model).unwrap()).unwrap();
    assert_eq!(model["coeffs"].as_array().unwrap().len(), 41);
    assert_eq!(std::fs::read_to_string(plot).unwrap().lines().count(), 401);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# config: "));
}

#[test]
fn validation_errors_exit_with_one() {
    let out = rpinv(&["table1", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "usage");

    let out = rpinv(&["diagnose", "--alpha", "-0.9", "--N", "5", "--n", "25"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "invalid_argument");

    let out = rpinv(&["fit-series", "--csv", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "io");
}

#[test]
fn singular_fits_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let mut text = String::from("date,location,new_cases\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    for k in 0..400 {
        text.push_str(&format!("{},Italy,{}\n", (start + chrono::Duration::days(k)).format("%Y-%m-%d"), k % 7));
    }
    std::fs::write(&csv, text).unwrap();
    let (model, plot) = (dir.path().join("model.json"), dir.path().join("plot.csv"));
    let out = rpinv(&[
        "fit-series",
        "--csv",
        csv.to_str().unwrap(),
        "--N",
        "330",
        "--n",
        "340",
        "--model",
        model.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "robust_fit_failure");
    assert!(!model.exists());

    let out = rpinv(&["diagnose", "--alpha", "0", "--N", "3", "--n", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "underdetermined");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"experiment": "table4", "trials": 1, "s": 2.0, "n": 300, "seed": 5}"#).unwrap();
    let out = rpinv(&["table4", "--config", config.to_str().unwrap(), "--seed", "6", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["config"]["seed"], 6);
    assert_eq!(value["config"]["trials"], 1);
    assert_eq!(value["rows"].as_array().unwrap().len(), 4);

    std::fs::write(&config, r#"{"experiment": "table4", "trails": 1}"#).unwrap();
    let out = rpinv(&["table4", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn help_exits_cleanly() {
    let out = rpinv(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["table1", "table2", "table3", "table4", "fit-series", "simulate-lfr", "diagnose"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}
