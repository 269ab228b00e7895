//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on a
//! numerical failure. Failures print one JSON line on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::{run, Experiment, ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::jacobi::{Domain, JacobiParams};
use crate::lfr::LfrVariant;
use crate::randsample::sample_beta;
use crate::specdiag::{build_design, spectral_report, theory_bounds};

#[derive(Debug, Parser)]
#[command(name = "rpinv", version, about = "Random pseudo-inverse regression experiments")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Result file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Monte Carlo trials per cell.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads; all available cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Args)]
struct Overrides {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Polynomial degree, or number of slope coefficients for LFR.
    #[arg(long = "N")]
    degree: Option<usize>,
    /// Sample size.
    #[arg(long = "n")]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Condition numbers of random Jacobi Gram matrices.
    Table1(Overrides),
    /// Cumulative condition numbers of the dyadic LFR blocks.
    Table2(Overrides),
    /// Weierstrass regression against kernel ridge regression.
    Table3 {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// LFR prediction and estimation errors.
    Table4(Overrides),
    /// Robust fit of a daily series read from CSV.
    FitSeries {
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        location: Option<String>,
        /// First day kept (YYYY-MM-DD).
        #[arg(long)]
        from: Option<String>,
        /// Last day kept (YYYY-MM-DD).
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
        /// Fitted model JSON.
        #[arg(long, default_value = "model.json")]
        model: PathBuf,
        /// Plot data CSV of (day, date, observed, fitted).
        #[arg(long, default_value = "plot.csv")]
        plot: PathBuf,
    },
    /// One LFR configuration, optionally with the truncated-slope risk.
    SimulateLfr {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Truncation level of the slope estimate.
        #[arg(long)]
        truncation: Option<f64>,
    },
    /// Spectral report of one random Gram matrix.
    Diagnose {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Example3,
    Table2,
}

#[derive(Debug, Serialize)]
pub struct Diagnosis {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub degree: usize,
    pub n: usize,
    pub seed: u64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa2: f64,
    pub near_singular: bool,
    /// Empty when `N < 2`, where the bound does not apply.
    pub condition1_ok: Option<bool>,
    pub kappa_bound_delta_0_1: Option<f64>,
}

/// Spectral report of the Gram matrix of `n` weight-law points on `[-1, 1]`.
pub fn diagnose(alpha: f64, beta: f64, degree: usize, n: usize, seed: u64) -> Result<Diagnosis> {
    let params = JacobiParams::new(alpha, beta)?;
    let basis = crate::jacobi::JacobiBasis::symmetric(params, degree);
    let samples = sample_beta(&params, n, Domain::Symmetric, seed)?;
    let report = spectral_report(&build_design(&basis, &samples)?.gram())?;
    let bounds = if degree >= 2 { Some(theory_bounds(&params, n, degree, params.is_chebyshev())?) } else { None };
    Ok(Diagnosis {
        alpha,
        beta,
        degree,
        n,
        seed,
        lambda_min: report.lambda_min,
        lambda_max: report.lambda_max,
        kappa2: report.kappa2,
        near_singular: report.near_singular,
        condition1_ok: bounds.as_ref().map(|b| b.condition1_ok),
        kappa_bound_delta_0_1: bounds.and_then(|b| b.kappa_bound(0.1)),
    })
}

fn apply(config: &mut ExperimentConfig, o: &Overrides) {
    config.alpha = o.alpha.or(config.alpha);
    config.beta = o.beta.or(config.beta);
    config.degree = o.degree.or(config.degree);
    config.n = o.n.or(config.n);
    config.s = o.s.or(config.s);
    config.sigma = o.sigma.or(config.sigma);
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut Vec<u8>) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn execute(cli: Cli, stdout: &mut Vec<u8>) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(t) = cli.trials {
        config.trials = Some(t);
    }
    if let Some(f) = cli.format {
        config.format = f;
    }
    if cli.out.is_some() {
        config.output = cli.out.clone();
    }
    let format = config.format;
    match &cli.command {
        Command::Table1(o) | Command::Table2(o) | Command::Table4(o) => {
            config.experiment = match cli.command {
                Command::Table1(_) => Experiment::Table1,
                Command::Table2(_) => Experiment::Table2,
                _ => Experiment::Table4,
            };
            apply(&mut config, o);
        }
        Command::Table3 { overrides, folds } => {
            config.experiment = Experiment::Table3;
            apply(&mut config, overrides);
            config.folds = folds.or(config.folds);
        }
        Command::SimulateLfr {
            overrides,
            variant,
            truncation,
        } => {
            config.experiment = Experiment::Custom;
            apply(&mut config, overrides);
            if let Some(v) = variant {
                config.variant = Some(match v {
                    VariantArg::Example3 => LfrVariant::Example3,
                    VariantArg::Table2 => LfrVariant::Table2,
                });
            }
            config.truncation = truncation.or(config.truncation);
        }
        Command::FitSeries {
            csv,
            location,
            from,
            to,
            iterations,
            overrides,
            model,
            plot,
        } => {
            config.experiment = Experiment::Covid;
            apply(&mut config, overrides);
            config.csv = csv.clone().or(config.csv);
            config.location = location.clone().or(config.location);
            config.from = from.clone().or(config.from);
            config.to = to.clone().or(config.to);
            if let Some(it) = iterations {
                config.ransac.iterations = *it;
            }
            config.validate()?;
            let run = super::run_timeseries(&config)?;
            run.write_model(model)?;
            run.write_plot(plot)?;
            let out = open_out(&config.output, stdout)?;
            return run.result.write(out, format);
        }
        Command::Diagnose { overrides } => {
            apply(&mut config, overrides);
            let alpha = config.alpha.ok_or_else(|| Error::Config("--alpha is required".into()))?;
            let beta = config.beta.unwrap_or(alpha);
            let degree = config.degree.ok_or_else(|| Error::Config("--N is required".into()))?;
            let n = config.n.ok_or_else(|| Error::Config("--n is required".into()))?;
            let d = diagnose(alpha, beta, degree, n, config.seed)?;
            let mut out = open_out(&config.output, stdout)?;
            match format {
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut out, &d)?;
                    writeln!(out)?;
                }
                OutputFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    w.serialize(&d)?;
                    w.flush()?;
                }
            }
            out.flush()?;
            return Ok(());
        }
    }
    let result = run(&config)?;
    let out = open_out(&config.output, stdout)?;
    result.write(out, format)
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return 1;
        }
    };
    let mut buffer = Vec::new();
    let outcome = match cli.threads {
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| execute(cli, &mut buffer)),
            Err(e) => Err(Error::Config(e.to_string())),
        },
        None => execute(cli, &mut buffer),
    };
    let outcome = outcome.and_then(|()| stdout.write_all(&buffer).and_then(|()| stdout.flush()).map_err(Error::from));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
