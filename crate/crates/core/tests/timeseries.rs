//! Time-series pipeline on synthetic CSV input.

use std::io::Write;
use std::path::PathBuf;

use chrono::NaiveDate;
use rpinv::bench::timeseries::{fit_series, TimeSeriesDataset};
use rpinv::bench::{run_timeseries, Experiment, ExperimentConfig};
use rpinv::jacobi::JacobiParams;
use rpinv::npreg::NpregModel;
use rpinv::Error;

fn write_series(dir: &tempfile::TempDir, name: &str, values: &[f64]) -> PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "date,location,new_cases,extra").unwrap();
    let start = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    for (i, v) in values.iter().enumerate() {
        let d = start + chrono::Duration::days(i as i64);
        writeln!(f, "{},Testland,{v},x", d.format("%Y-%m-%d")).unwrap();
        writeln!(f, "{},Elsewhere,1,x", d.format("%Y-%m-%d")).unwrap();
    }
    path
}

fn series_config(path: PathBuf) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Experiment::Covid);
    c.csv = Some(path);
    c.location = Some("Testland".into());
    c
}

#[test]
fn constant_series_is_fitted_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(&dir, "flat.csv", &[250.0; 400]);
    let run = run_timeseries(&series_config(path)).unwrap();
    assert_eq!(run.dataset.len(), 400);
    for row in &run.plot {
        assert!((row.fitted - 250.0).abs() <= 1e-6, "day {}: {}", row.day, row.fitted);
    }
    assert!(run.fit.score <= 1e-12);
}

#[test]
fn polynomial_series_error_is_index_rounding() {
    let m = 500;
    let p = |x: f64| 100.0 + 80.0 * x - 60.0 * x * x + 5.0 * x.powi(5);
    let values: Vec<f64> = (1..=m).map(|k| p(k as f64 / m as f64)).collect();
    let data = TimeSeriesDataset {
        location: "poly".into(),
        dates: (0..m).map(|i| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(i)).collect(),
        values,
        lines: (2..2 + m as u64).collect(),
    };
    let params = JacobiParams::chebyshev();
    let fit = fit_series(&data, params, 40, 340, 10, 5).unwrap();

    // reading day ceil(m x) instead of x perturbs each output by at most max|p'| / m
    let max_slope = 80.0 + 120.0 + 25.0;
    let rounding = max_slope / m as f64;
    let report = fit.model.fit_report().unwrap();
    let amplification = report.lambda_max / report.lambda_min;
    let bound = amplification * rounding * rounding;
    assert!(fit.score <= bound, "score {:e} exceeds rounding bound {bound:e}", fit.score);
    let mid = fit.model.predict(0.5).unwrap();
    assert!((mid - p(0.5)).abs() <= 10.0 * rounding, "{mid} vs {}", p(0.5));
}

#[test]
fn conditioning_is_of_order_ten() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (0..594).map(|k| 1000.0 + 800.0 * (k as f64 / 90.0).sin()).collect();
    let path = write_series(&dir, "wave.csv", &values);
    let run = run_timeseries(&series_config(path)).unwrap();
    let mean = run.result.find("Testland", "mean_kappa2").next().unwrap();
    assert_eq!(mean.published, Some(9.12));
    assert!((3.0..=30.0).contains(&mean.value), "mean kappa {}", mean.value);
    assert_eq!(run.fit.kappas.len() + run.fit.singular_iterations, 10);
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(&dir, "flat.csv", &[3.0; 360]);
    let run = run_timeseries(&series_config(path)).unwrap();
    let (model_path, plot_path) = (dir.path().join("model.json"), dir.path().join("plot.csv"));
    run.write_model(&model_path).unwrap();
    run.write_plot(&plot_path).unwrap();
    let model = NpregModel::from_json(&std::fs::read_to_string(model_path).unwrap()).unwrap();
    assert_eq!(model.coeffs(), run.fit.model.coeffs());
    let plot = std::fs::read_to_string(plot_path).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("day,date,observed,fitted"));
    assert_eq!(lines.count(), 360);
}

#[test]
fn date_window_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_series(&dir, "flat.csv", &[7.0; 400]);
    let mut c = series_config(path.clone());
    c.from = Some("2020-03-11".into());
    c.to = Some("2021-03-10".into());
    let run = run_timeseries(&c).unwrap();
    assert_eq!(run.dataset.len(), 365);
    assert_eq!(run.plot[0].date, "2020-03-11");

    c.to = Some("2020-06-01".into());
    assert!(matches!(run_timeseries(&c), Err(Error::InsufficientData { required: 340, .. })));

    let mut c = series_config(path);
    c.location = Some("Atlantis".into());
    assert!(matches!(run_timeseries(&c), Err(Error::UnknownLocation(_))));
}
