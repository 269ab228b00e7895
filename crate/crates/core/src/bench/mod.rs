//! Experiment harness: configuration, the table runners, the time-series
//! pipeline and result serialization.
//!
//! Every experiment is a pure function of its resolved [`ExperimentConfig`].
//! Results are written in long format, one metric per row, with the resolved
//! configuration embedded in the file.

pub mod cli;
mod tables;
pub mod timeseries;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfr::LfrVariant;

pub use tables::{run_custom_lfr, run_table1, run_table2, run_table3, run_table4};
pub use timeseries::{run_timeseries, TimeSeriesDataset, TimeSeriesRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Table1,
    Table2,
    Table3,
    Table4,
    Covid,
    Custom,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::Table4 => "table4",
            Experiment::Covid => "covid",
            Experiment::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacSettings {
    pub iterations: usize,
}

impl Default for RansacSettings {
    fn default() -> Self {
        Self { iterations: 10 }
    }
}

/// Experiment configuration.
///
/// Sweep dimensions left as `null` take the full sweep of the selected table;
/// a value replaces that dimension in every row. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "N")]
    pub degree: Option<usize>,
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub sigma: Option<f64>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub ransac: RansacSettings,
    /// Truncation level `L`; enables the risk estimate of the custom LFR run.
    pub truncation: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub variant: Option<LfrVariant>,
    pub csv: Option<PathBuf>,
    pub location: Option<String>,
    /// Inclusive ISO-8601 date bounds of the time series.
    pub from: Option<String>,
    pub to: Option<String>,
    /// Result path; not echoed, so files written to different places stay identical.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Table1,
            alpha: None,
            beta: None,
            degree: None,
            n: None,
            s: None,
            sigma: None,
            trials: None,
            seed: 42,
            ransac: RansacSettings::default(),
            truncation: None,
            lambda_grid: None,
            folds: None,
            variant: None,
            csv: None,
            location: None,
            from: None,
            to: None,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Fill every single-valued default of the selected experiment.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        match c.experiment {
            Experiment::Table1 => {
                c.trials.get_or_insert(50);
            }
            Experiment::Table2 => {
                c.trials.get_or_insert(10);
            }
            Experiment::Table3 => {
                c.trials.get_or_insert(10);
                c.n.get_or_insert(100);
                c.alpha.get_or_insert(-0.5);
                c.folds.get_or_insert(5);
                c.lambda_grid.get_or_insert_with(crate::krr::default_lambda_grid);
            }
            Experiment::Table4 => {
                c.trials.get_or_insert(10);
                c.degree.get_or_insert(50);
                c.sigma.get_or_insert(0.5);
            }
            Experiment::Covid => {
                c.alpha.get_or_insert(-0.5);
                c.degree.get_or_insert(40);
                c.n.get_or_insert(340);
            }
            Experiment::Custom => {
                c.trials.get_or_insert(10);
                c.n.get_or_insert(200);
                c.degree.get_or_insert(50);
                c.s.get_or_insert(2.0);
                c.sigma.get_or_insert(0.5);
                c.variant.get_or_insert(LfrVariant::Example3);
            }
        }
        if c.beta.is_none() && c.experiment != Experiment::Table1 {
            c.beta = c.alpha;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == Some(0) {
            return bad("trials must be >= 1".into());
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if let Some(v) = v {
                if !(v > -1.0 && v.is_finite()) {
                    return bad(format!("{name} must be a finite value > -1, got {v}"));
                }
            }
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("sigma must be >= 0, got {s}"));
            }
        }
        if let Some(s) = self.s {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("s must be >= 0, got {s}"));
            }
        }
        if self.n == Some(0) {
            return bad("n must be >= 1".into());
        }
        if self.ransac.iterations == 0 {
            return bad("ransac.iterations must be >= 1".into());
        }
        if let Some(l) = self.truncation {
            if !(l > 0.0) {
                return bad(format!("truncation level must be positive, got {l}"));
            }
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0)) {
                return bad("lambda_grid must be a non-empty list of positive values".into());
            }
        }
        if matches!(self.folds, Some(f) if f < 2) {
            return bad("folds must be >= 2".into());
        }
        Ok(())
    }
}

/// One metric of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "N")]
    pub degree: Option<usize>,
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub sigma: Option<f64>,
    /// Estimator or table column the metric belongs to.
    pub column: String,
    pub metric: String,
    pub value: f64,
    /// Published value of the matching table cell, when there is one.
    pub published: Option<f64>,
    pub trials: usize,
    /// Seed the cell's trials were derived from.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricRow>,
    /// Wall time per stage; kept out of the written files.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl ExperimentResult {
    pub fn find(&self, column: &str, metric: &str) -> impl Iterator<Item = &MetricRow> {
        let (column, metric) = (column.to_string(), metric.to_string());
        self.rows.iter().filter(move |r| r.column == column && r.metric == metric)
    }

    pub fn write<W: Write>(&self, out: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Json => write_json(out, &self.config, &self.rows),
            OutputFormat::Csv => write_csv(out, &self.config, &self.rows),
        }
    }

    pub fn write_to_path(&self, path: &std::path::Path, format: OutputFormat) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file), format)
    }
}

/// `{"config": ..., "rows": [...]}`.
pub(crate) fn write_json<W: Write, R: Serialize>(mut out: W, config: &ExperimentConfig, rows: &[R]) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, R> {
        config: &'a ExperimentConfig,
        rows: &'a [R],
    }
    serde_json::to_writer_pretty(&mut out, &Doc { config, rows })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// CSV with a leading `# config: <json>` comment line.
pub(crate) fn write_csv<W: Write, R: Serialize>(mut out: W, config: &ExperimentConfig, rows: &[R]) -> Result<()> {
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back the rows of a CSV result file.
pub fn read_csv_rows(text: &str) -> Result<(ExperimentConfig, Vec<MetricRow>)> {
    let first = text.lines().next().unwrap_or_default();
    let config = first
        .strip_prefix("# config: ")
        .ok_or_else(|| Error::Config("result file lacks the config line".into()))
        .and_then(ExperimentConfig::from_json)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = reader.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?;
    Ok((config, rows))
}

/// Run a table or custom experiment.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    match config.experiment {
        Experiment::Table1 => run_table1(config),
        Experiment::Table2 => run_table2(config),
        Experiment::Table3 => run_table3(config),
        Experiment::Table4 => run_table4(config),
        Experiment::Custom => run_custom_lfr(config),
        Experiment::Covid => run_timeseries(config).map(|r| r.result),
    }
}

pub(crate) struct Stopwatch {
    timings: Vec<StageTiming>,
}

impl Stopwatch {
    pub(crate) fn new() -> Self {
        Self { timings: Vec::new() }
    }

    pub(crate) fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(stage, start.elapsed().as_secs_f64());
        out
    }

    pub(crate) fn add(&mut self, stage: &str, seconds: f64) {
        match self.timings.iter_mut().find(|t| t.stage == stage) {
            Some(t) => t.seconds += seconds,
            None => self.timings.push(StageTiming {
                stage: stage.to_string(),
                seconds,
            }),
        }
    }

    pub(crate) fn finish(self) -> Vec<StageTiming> {
        self.timings
    }
}
