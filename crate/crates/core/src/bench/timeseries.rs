//! Daily count series: CSV ingestion and the robust Jacobi fit on `[0, 1]`.
//!
//! Day `k` of an `m`-day series sits at `x = k / m`. Sample points `X_i` drawn
//! from the weight law on `[0, 1]` read the series at day `ceil(m X_i)`.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentResult, MetricRow, Stopwatch};
use crate::error::{Error, Result, RowError};
use crate::jacobi::{Domain, JacobiBasis, JacobiParams};
use crate::npreg::{fit_points, NpregModel};
use crate::randsample::{derive_seed, sample_beta};
use crate::specdiag::mean_std;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub location: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    /// Source line of each retained row.
    pub lines: Vec<u64>,
}

impl TimeSeriesDataset {
    /// Number of days `m`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `x_k = k / m` for `k = 1..=m`.
    pub fn inputs(&self) -> Vec<f64> {
        let m = self.len() as f64;
        (1..=self.len()).map(|k| k as f64 / m).collect()
    }

    /// Value at day `ceil(m x)`, clamped to `[1, m]`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.day_index(x) - 1]
    }

    pub fn day_index(&self, x: f64) -> usize {
        let m = self.len();
        ((m as f64 * x).ceil() as usize).clamp(1, m)
    }

    /// Series for `location` between the inclusive bounds `from` and `to`.
    ///
    /// Needs a `date,location,new_cases` header; other columns are ignored and
    /// an empty count reads as zero.
    pub fn from_csv_reader<R: Read>(input: R, location: Option<&str>, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Rows(vec![RowError { line: 1, message: format!("missing column {name:?}") }]))
        };
        let (c_date, c_loc, c_val) = (col("date")?, col("location")?, col("new_cases")?);
        let mut errors = Vec::new();
        let mut rows: Vec<(u64, String, NaiveDate, f64)> = Vec::new();
        for record in reader.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    errors.push(RowError { line, message: e.to_string() });
                    continue;
                }
            };
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).map(str::trim);
            let (Some(date), Some(loc)) = (field(c_date), field(c_loc)) else {
                errors.push(RowError { line, message: "row is missing fields".into() });
                continue;
            };
            let date = match NaiveDate::parse_from_str(date, "%Y-%m-%d") {
                Ok(d) => d,
                Err(e) => {
                    errors.push(RowError { line, message: format!("bad date {date:?}: {e}") });
                    continue;
                }
            };
            let value = match field(c_val).unwrap_or("") {
                "" => 0.0,
                text => match text.parse::<f64>() {
                    Ok(v) if v >= 0.0 && v.is_finite() => v,
                    Ok(v) => {
                        errors.push(RowError { line, message: format!("count {v} is not a finite value >= 0") });
                        continue;
                    }
                    Err(_) => {
                        errors.push(RowError { line, message: format!("bad count {text:?}") });
                        continue;
                    }
                },
            };
            rows.push((line, loc.to_string(), date, value));
        }
        if !errors.is_empty() {
            return Err(Error::Rows(errors));
        }
        let location = match location {
            Some(l) => l.to_string(),
            None => {
                let first = rows.first().map(|r| r.1.clone()).unwrap_or_default();
                if rows.iter().any(|r| r.1 != first) {
                    return Err(Error::Config("the file holds several locations; pick one".into()));
                }
                first
            }
        };
        if !rows.iter().any(|r| r.1 == location) {
            return Err(Error::UnknownLocation(location));
        }
        let mut out = Self {
            location: location.clone(),
            dates: Vec::new(),
            values: Vec::new(),
            lines: Vec::new(),
        };
        for (line, loc, date, value) in rows {
            if loc != location || from.is_some_and(|f| date < f) || to.is_some_and(|t| date > t) {
                continue;
            }
            if out.dates.last().is_some_and(|last| date <= *last) {
                return Err(Error::NonMonotoneDates { line });
            }
            out.dates.push(date);
            out.values.push(value);
            out.lines.push(line);
        }
        Ok(out)
    }

    pub fn from_csv_path(path: &Path, location: Option<&str>, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file), location, from, to)
    }
}

/// One plotted day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub day: usize,
    pub date: String,
    pub observed: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub model: NpregModel,
    /// Mean squared error over all `m` days.
    pub score: f64,
    pub iteration: usize,
    /// `kappa2(A_N)` of every non-singular iteration, in iteration order.
    pub kappas: Vec<f64>,
    pub singular_iterations: usize,
}

/// Robust fit: each iteration draws `n` fresh points, fits, and is scored on all `m` days.
pub fn fit_series(data: &TimeSeriesDataset, params: JacobiParams, degree: usize, n: usize, iterations: usize, seed: u64) -> Result<SeriesFit> {
    if data.len() < n {
        return Err(Error::InsufficientData {
            available: data.len(),
            required: n,
        });
    }
    if iterations < 1 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let basis = JacobiBasis::new(params, degree, Domain::Unit);
    let xs = data.inputs();
    let mut best: Option<(NpregModel, f64, usize)> = None;
    let mut kappas = Vec::new();
    let mut singular = 0;
    for it in 0..iterations {
        let samples = sample_beta(&params, n, Domain::Unit, derive_seed(seed, &format!("series/draw/{it}")))?;
        let y: Vec<f64> = samples.points.iter().map(|&x| data.value_at(x)).collect();
        let model = match fit_points(&basis, &samples.points, &y) {
            Ok(m) => m,
            Err(Error::NearSingular(_)) => {
                singular += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(r) = model.fit_report() {
            kappas.push(r.kappa2);
        }
        let score = model.mse(&xs, &data.values)?;
        if best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((model, score, it));
        }
    }
    let (model, score, iteration) = best.ok_or(Error::RobustFitFailure(iterations))?;
    Ok(SeriesFit {
        model,
        score,
        iteration,
        kappas,
        singular_iterations: singular,
    })
}

pub struct TimeSeriesRun {
    pub result: ExperimentResult,
    pub dataset: TimeSeriesDataset,
    pub fit: SeriesFit,
    pub plot: Vec<PlotRow>,
}

impl TimeSeriesRun {
    pub fn write_plot(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.plot {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_model(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.fit.model.to_json()?)?;
        Ok(())
    }
}

fn parse_date(text: &Option<String>) -> Result<Option<NaiveDate>> {
    text.as_deref()
        .map(|t| NaiveDate::parse_from_str(t, "%Y-%m-%d").map_err(|e| Error::Config(format!("bad date {t:?}: {e}"))))
        .transpose()
}

/// Ingest the configured CSV and fit it.
pub fn run_timeseries(config: &ExperimentConfig) -> Result<TimeSeriesRun> {
    let config = config.resolved();
    config.validate()?;
    let path = config.csv.clone().ok_or_else(|| Error::Config("a CSV path is required".into()))?;
    let mut watch = Stopwatch::new();
    let (from, to) = (parse_date(&config.from)?, parse_date(&config.to)?);
    let dataset = watch.time("ingest", || TimeSeriesDataset::from_csv_path(&path, config.location.as_deref(), from, to))?;
    run_on_dataset(config, dataset, watch)
}

pub(crate) fn run_on_dataset(config: ExperimentConfig, dataset: TimeSeriesDataset, mut watch: Stopwatch) -> Result<TimeSeriesRun> {
    let alpha = config.alpha.unwrap_or(-0.5);
    let params = JacobiParams::new(alpha, config.beta.unwrap_or(alpha))?;
    let (degree, n) = (config.degree.unwrap_or(40), config.n.unwrap_or(340));
    let iterations = config.ransac.iterations;
    let fit = watch.time("fit", || fit_series(&dataset, params, degree, n, iterations, config.seed))?;
    let xs = dataset.inputs();
    let fitted = fit.model.predict_many(&xs)?;
    let plot = dataset
        .dates
        .iter()
        .zip(&dataset.values)
        .zip(&fitted)
        .enumerate()
        .map(|(i, ((d, &observed), &fitted))| PlotRow {
            day: i + 1,
            date: d.format("%Y-%m-%d").to_string(),
            observed,
            fitted,
        })
        .collect();
    let template = MetricRow {
        experiment: config.experiment.label().to_string(),
        alpha: Some(params.alpha()),
        beta: Some(params.beta()),
        degree: Some(degree),
        n: Some(n),
        s: None,
        sigma: None,
        column: dataset.location.clone(),
        metric: String::new(),
        value: f64::NAN,
        published: None,
        trials: iterations,
        seed: config.seed,
    };
    let row = |metric: &str, value: f64, published: Option<f64>| MetricRow {
        metric: metric.to_string(),
        value,
        published,
        ..template.clone()
    };
    let (mean_kappa, _) = mean_std(&fit.kappas);
    let best_kappa = fit.model.fit_report().map_or(f64::NAN, |r| r.kappa2);
    let rows = vec![
        row("days", dataset.len() as f64, None),
        row("full_set_mse", fit.score, None),
        row("best_iteration", fit.iteration as f64, None),
        row("best_kappa2", best_kappa, None),
        row("mean_kappa2", mean_kappa, Some(9.12)),
        row("singular_iterations", fit.singular_iterations as f64, None),
    ];
    Ok(TimeSeriesRun {
        result: ExperimentResult {
            config,
            rows,
            timings: watch.finish(),
        },
        dataset,
        fit,
        plot,
    })
}
