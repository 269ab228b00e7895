use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentResult, MetricRow, Stopwatch};
use crate::error::{Error, Result};
use crate::jacobi::{uniform_grid, Domain, JacobiBasis, JacobiParams};
use crate::krr::{cross_validate, krr_fit};
use crate::lfr::{self, LfrRiskConfig, LfrVariant};
use crate::npreg::{fit_points, weierstrass, GRID_POINTS};
use crate::randsample::{derive_seed, make_noise, sample_beta, NoiseSpec};
use crate::specdiag::{mc_condition_number, mean_std, theory_bounds, McConfig, SamplingLaw};

const WEIERSTRASS_TOL: f64 = 1e-12;

/// `(alpha, N, n, kappa(A), kappa(A~))` of the published Table 1.
const TABLE1: [(f64, usize, usize, f64, f64); 8] = [
    (-0.5, 5, 25, 7.74, 6.48),
    (-0.5, 10, 40, 17.57, 11.03),
    (-0.5, 15, 60, 24.72, 22.03),
    (-0.5, 20, 100, 27.09, 12.03),
    (0.0, 5, 40, 8.36, 7.27),
    (0.0, 10, 100, 19.94, 13.36),
    (0.0, 15, 125, 33.84, 22.52),
    (0.0, 20, 250, 133.07, 29.82),
];

/// `(s, N, n, cumulative kappa)` of the published Table 2.
const TABLE2: [(f64, usize, usize, f64); 24] = [
    (0.75, 20, 100, 12.05),
    (0.75, 20, 150, 11.39),
    (0.75, 20, 200, 11.22),
    (0.75, 30, 100, 15.49),
    (0.75, 30, 150, 12.85),
    (0.75, 30, 200, 12.26),
    (0.75, 40, 100, 17.63),
    (0.75, 40, 150, 15.66),
    (0.75, 40, 200, 15.16),
    (0.75, 50, 100, 19.66),
    (0.75, 50, 150, 18.08),
    (0.75, 50, 200, 15.90),
    (1.5, 20, 100, 25.59),
    (1.5, 20, 150, 23.78),
    (1.5, 20, 200, 21.90),
    (1.5, 30, 100, 29.55),
    (1.5, 30, 150, 28.60),
    (1.5, 30, 200, 27.97),
    (1.5, 40, 100, 36.23),
    (1.5, 40, 150, 33.32),
    (1.5, 40, 200, 31.39),
    (1.5, 50, 100, 41.01),
    (1.5, 50, 150, 37.11),
    (1.5, 50, 200, 31.39),
];

/// `(sigma, s, N, MSE npreg, MSE krr)` of the published Table 3.
const TABLE3: [(f64, f64, usize, f64, f64); 12] = [
    (0.1, 1.0, 10, 1.53e-1, 1.60e-1),
    (0.1, 1.0, 20, 5.88e-3, 7.53e-3),
    (0.1, 1.0, 30, 3.94e-3, 4.05e-3),
    (0.1, 2.0, 10, 1.71e-3, 1.44e-3),
    (0.1, 2.0, 20, 2.00e-3, 1.58e-3),
    (0.1, 2.0, 30, 2.93e-3, 2.12e-3),
    (0.05, 1.0, 10, 1.42e-1, 1.29e-1),
    (0.05, 1.0, 20, 4.86e-3, 6.31e-3),
    (0.05, 1.0, 30, 1.82e-3, 1.85e-3),
    (0.05, 2.0, 10, 8.23e-4, 9.31e-4),
    (0.05, 2.0, 20, 6.35e-4, 6.98e-4),
    (0.05, 2.0, 30, 6.55e-4, 9.34e-4),
];

/// `(s, n, E0, E2)` of the published Table 4.
const TABLE4: [(f64, usize, f64, f64); 9] = [
    (1.5, 100, 2.62e-3, 7.72e-2),
    (1.5, 200, 1.28e-3, 3.12e-2),
    (1.5, 300, 3.15e-4, 1.62e-2),
    (2.0, 100, 1.52e-3, 6.94e-3),
    (2.0, 200, 1.11e-3, 5.17e-3),
    (2.0, 300, 3.84e-4, 1.54e-3),
    (4.0, 100, 2.02e-3, 3.32e-1),
    (4.0, 200, 3.92e-4, 9.11e-2),
    (4.0, 300, 2.51e-4, 1.28e-2),
];

/// Merge cells with equal keys in first-occurrence order, keeping any published value.
fn dedup<K: PartialEq, P>(items: Vec<(K, Option<P>)>) -> Vec<(K, Option<P>)> {
    let mut out: Vec<(K, Option<P>)> = Vec::with_capacity(items.len());
    for (key, published) in items {
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some(existing) => {
                if existing.1.is_none() {
                    existing.1 = published;
                }
            }
            None => out.push((key, published)),
        }
    }
    out
}

fn pick<T: Copy>(value: Option<T>, default: T) -> T {
    value.unwrap_or(default)
}

/// Mean over the finite values, summed in sorted order.
fn finite_mean_std(values: &[f64]) -> (f64, f64, usize) {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let (m, s) = mean_std(&finite);
    (m, s, values.len() - finite.len())
}

struct RowBuilder {
    template: MetricRow,
}

impl RowBuilder {
    fn new(config: &ExperimentConfig, trials: usize, seed: u64) -> Self {
        Self {
            template: MetricRow {
                experiment: config.experiment.label().to_string(),
                alpha: None,
                beta: None,
                degree: None,
                n: None,
                s: None,
                sigma: None,
                column: String::new(),
                metric: String::new(),
                value: f64::NAN,
                published: None,
                trials,
                seed,
            },
        }
    }

    fn cell(mut self, f: impl FnOnce(&mut MetricRow)) -> Self {
        f(&mut self.template);
        self
    }

    fn row(&self, column: &str, metric: &str, value: f64, published: Option<f64>) -> MetricRow {
        MetricRow {
            column: column.to_string(),
            metric: metric.to_string(),
            value,
            published,
            ..self.template.clone()
        }
    }
}

/// Mean `kappa2` of direct Beta sampling and of normal inputs pushed through the CDF transform.
pub fn run_table1(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved();
    config.validate()?;
    let trials = config.trials.unwrap_or(50);
    let mut watch = Stopwatch::new();
    let cells = dedup(
        TABLE1
            .iter()
            .map(|&(a, deg, size, ka, kt)| {
                let alpha = pick(config.alpha, a);
                let beta = config.beta.unwrap_or(alpha);
                let degree = pick(config.degree, deg);
                let n = pick(config.n, size);
                let same = alpha == a && beta == a && degree == deg && n == size;
                let published = same.then_some((ka.to_bits(), kt.to_bits()));
                ((alpha.to_bits(), beta.to_bits(), degree, n), published)
            })
            .collect(),
    );
    let mut rows = Vec::new();
    for ((a_bits, b_bits, degree, n), published) in cells {
        let (alpha, beta) = (f64::from_bits(a_bits), f64::from_bits(b_bits));
        let published = published.map(|(x, y)| (f64::from_bits(x), f64::from_bits(y)));
        let params = JacobiParams::new(alpha, beta)?;
        let builder = RowBuilder::new(&config, trials, config.seed).cell(|r| {
            r.alpha = Some(alpha);
            r.beta = Some(beta);
            r.degree = Some(degree);
            r.n = Some(n);
        });
        for (column, law, published_value) in [
            ("kappa_A", SamplingLaw::Beta, published.map(|p| p.0)),
            ("kappa_A_tilde", SamplingLaw::NormalExactCdf, published.map(|p| p.1)),
        ] {
            let mc = McConfig {
                params,
                n,
                degree,
                trials,
                law,
                domain: Domain::Unit,
                master_seed: config.seed,
            };
            let summary = watch.time(column, || mc_condition_number(&mc))?;
            rows.push(builder.row(column, "mean_kappa2", summary.mean_kappa2, published_value));
            rows.push(builder.row(column, "std_kappa2", summary.std, None));
            rows.push(builder.row(column, "n_singular", summary.n_singular as f64, None));
        }
        if degree >= 2 && n > degree {
            let bounds = theory_bounds(&params, n, degree, params.is_chebyshev())?;
            rows.push(builder.row("theory", "condition1_ok", f64::from(u8::from(bounds.condition1_ok)), None));
            rows.push(builder.row("theory", "kappa_bound_delta_0.1", bounds.kappa_bound(0.1).unwrap_or(f64::INFINITY), None));
        }
    }
    Ok(ExperimentResult {
        config,
        rows,
        timings: watch.finish(),
    })
}

/// Cumulative condition number of the dyadic Gram blocks with `xi_j = j^(-s)`.
pub fn run_table2(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved();
    config.validate()?;
    let trials = config.trials.unwrap_or(10);
    let cells = dedup(
        TABLE2
            .iter()
            .map(|&(s, deg, n, k)| {
                let (s2, deg2, n2) = (pick(config.s, s), pick(config.degree, deg), pick(config.n, n));
                let published = (s2 == s && deg2 == deg && n2 == n).then_some(k.to_bits());
                ((s2.to_bits(), deg2, n2), published)
            })
            .collect(),
    );
    let mut watch = Stopwatch::new();
    let per_cell = watch.time("cumulative_kappa", || {
        cells
            .par_iter()
            .map(|&((s_bits, degree, n), published)| {
                let s = f64::from_bits(s_bits);
                let cell_seed = derive_seed(config.seed, &format!("table2/{s}/{degree}/{n}"));
                let kappas = (0..trials)
                    .map(|t| {
                        let p = lfr::simulate_problem(n, degree, s, 0.0, LfrVariant::Table2, derive_seed(cell_seed, &format!("trial/{t}")))?;
                        let (k, reports) = lfr::cumulative_kappa(&p)?;
                        Ok(if reports.iter().any(|r| r.near_singular) { f64::INFINITY } else { k })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((s, degree, n, published.map(f64::from_bits), cell_seed, kappas))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (s, degree, n, published, cell_seed, kappas) in per_cell {
        let builder = RowBuilder::new(&config, trials, cell_seed).cell(|r| {
            r.s = Some(s);
            r.degree = Some(degree);
            r.n = Some(n);
        });
        let (mean, std, singular) = finite_mean_std(&kappas);
        let bound = lfr::cumulative_kappa_envelope(s, degree);
        rows.push(builder.row("G", "mean_cumulative_kappa", mean, published));
        rows.push(builder.row("G", "std_cumulative_kappa", std, None));
        rows.push(builder.row("G", "n_singular", singular as f64, None));
        rows.push(builder.row("envelope", "cumulative_kappa_bound", bound, None));
        rows.push(builder.row("envelope", "bound_ok", f64::from(u8::from(mean <= bound)), None));
    }
    Ok(ExperimentResult {
        config,
        rows,
        timings: watch.finish(),
    })
}

/// Per-trial grid MSE of the least-squares and the kernel ridge estimates.
pub(crate) struct Table3Trial {
    pub npreg: Option<f64>,
    pub krr: f64,
    pub npreg_seconds: f64,
    pub krr_seconds: f64,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn table3_trial(
    params: &JacobiParams,
    degree: usize,
    n: usize,
    s: f64,
    sigma: f64,
    grid_lambda: &[f64],
    folds: usize,
    seed: u64,
    grid: &[f64],
    truth: &[f64],
) -> Result<Table3Trial> {
    let samples = sample_beta(params, n, Domain::Symmetric, derive_seed(seed, "points"))?;
    let noise = make_noise(&NoiseSpec::gaussian(sigma, derive_seed(seed, "noise")), n)?;
    let y = samples
        .points
        .iter()
        .zip(&noise)
        .map(|(&x, e)| Ok(weierstrass(s, x, WEIERSTRASS_TOL)? + e))
        .collect::<Result<Vec<f64>>>()?;
    let grid_mse = |pred: &dyn Fn(f64) -> f64| grid.iter().zip(truth).map(|(&x, t)| (pred(x) - t).powi(2)).sum::<f64>() / grid.len() as f64;

    let start = std::time::Instant::now();
    let basis = JacobiBasis::symmetric(*params, degree);
    let fitted = fit_points(&basis, &samples.points, &y);
    let npreg_seconds = start.elapsed().as_secs_f64();
    let npreg = match fitted {
        Ok(model) => Some(grid_mse(&|x| model.predict_raw(x).unwrap_or(f64::NAN))),
        Err(e) if e.is_numerical() => None,
        Err(e) => return Err(e),
    };

    let start = std::time::Instant::now();
    let bandwidth = degree as f64;
    let cv = cross_validate(&samples.points, &y, bandwidth, grid_lambda, folds, derive_seed(seed, "folds"))?;
    let model = krr_fit(&samples.points, &y, bandwidth, cv.best_lambda)?;
    let krr_seconds = start.elapsed().as_secs_f64();
    Ok(Table3Trial {
        npreg,
        krr: grid_mse(&|x| model.predict(x)),
        npreg_seconds,
        krr_seconds,
    })
}

/// Weierstrass regression: least squares over `N + 1` Jacobi polynomials against sinc-kernel ridge with `c = N`.
pub fn run_table3(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved();
    config.validate()?;
    let trials = config.trials.unwrap_or(10);
    let n = config.n.unwrap_or(100);
    let alpha = config.alpha.unwrap_or(-0.5);
    let beta = config.beta.unwrap_or(alpha);
    let params = JacobiParams::new(alpha, beta)?;
    let folds = config.folds.unwrap_or(5);
    let lambdas = config.lambda_grid.clone().unwrap_or_else(crate::krr::default_lambda_grid);
    if folds > n {
        return Err(Error::Config(format!("folds ({folds}) exceed n ({n})")));
    }
    let default_cell = alpha == -0.5 && beta == -0.5 && n == 100;
    let cells = dedup(
        TABLE3
            .iter()
            .map(|&(sg, s, deg, p1, p2)| {
                let (sg2, s2, deg2) = (pick(config.sigma, sg), pick(config.s, s), pick(config.degree, deg));
                let published = (default_cell && sg2 == sg && s2 == s && deg2 == deg).then_some((p1.to_bits(), p2.to_bits()));
                ((sg2.to_bits(), s2.to_bits(), deg2), published)
            })
            .collect(),
    );
    let grid = uniform_grid(-1.0, 1.0, GRID_POINTS);
    let mut watch = Stopwatch::new();
    let mut rows = Vec::new();
    for ((sg_bits, s_bits, degree), published) in cells {
        let (sigma, s) = (f64::from_bits(sg_bits), f64::from_bits(s_bits));
        let published = published.map(|(a, b)| (f64::from_bits(a), f64::from_bits(b)));
        let truth = grid.iter().map(|&x| weierstrass(s, x, WEIERSTRASS_TOL)).collect::<Result<Vec<f64>>>()?;
        let cell_seed = derive_seed(config.seed, &format!("table3/{sigma}/{s}/{degree}/{n}/{alpha}/{beta}"));
        let results = (0..trials)
            .into_par_iter()
            .map(|t| {
                table3_trial(&params, degree, n, s, sigma, &lambdas, folds, derive_seed(cell_seed, &format!("trial/{t}")), &grid, &truth)
            })
            .collect::<Result<Vec<_>>>()?;
        for r in &results {
            watch.add("npreg_fit", r.npreg_seconds);
            watch.add("krr_fit", r.krr_seconds);
        }
        let npreg: Vec<f64> = results.iter().map(|r| r.npreg.unwrap_or(f64::INFINITY)).collect();
        let krr: Vec<f64> = results.iter().map(|r| r.krr).collect();
        let (np_mean, np_std, np_singular) = finite_mean_std(&npreg);
        let (krr_mean, krr_std, _) = finite_mean_std(&krr);
        let builder = RowBuilder::new(&config, trials, cell_seed).cell(|r| {
            r.alpha = Some(alpha);
            r.beta = Some(beta);
            r.degree = Some(degree);
            r.n = Some(n);
            r.s = Some(s);
            r.sigma = Some(sigma);
        });
        rows.push(builder.row("npreg", "mean_mse", np_mean, published.map(|p| p.0)));
        rows.push(builder.row("npreg", "std_mse", np_std, None));
        rows.push(builder.row("npreg", "n_singular", np_singular as f64, None));
        rows.push(builder.row("krr", "mean_mse", krr_mean, published.map(|p| p.1)));
        rows.push(builder.row("krr", "std_mse", krr_std, None));
        rows.push(builder.row("krr", "bandwidth", degree as f64, None));
    }
    Ok(ExperimentResult {
        config,
        rows,
        timings: watch.finish(),
    })
}

/// Mean prediction and estimation errors of the dyadic LFR estimator.
pub fn run_table4(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved();
    config.validate()?;
    let trials = config.trials.unwrap_or(10);
    let degree = config.degree.unwrap_or(50);
    let sigma = config.sigma.unwrap_or(0.5);
    let default_cell = degree == 50 && sigma == 0.5;
    let cells = dedup(
        TABLE4
            .iter()
            .map(|&(s, n, e0, e2)| {
                let (s2, n2) = (pick(config.s, s), pick(config.n, n));
                let published = (default_cell && s2 == s && n2 == n).then_some((e0.to_bits(), e2.to_bits()));
                ((s2.to_bits(), n2), published)
            })
            .collect(),
    );
    let mut watch = Stopwatch::new();
    let per_cell = watch.time("lfr_fit", || {
        cells
            .par_iter()
            .map(|&((s_bits, n), published)| {
                let s = f64::from_bits(s_bits);
                let cell_seed = derive_seed(config.seed, &format!("table4/{s}/{n}/{degree}/{sigma}"));
                let outcomes = lfr_trials(n, degree, s, sigma, LfrVariant::Example3, trials, cell_seed)?;
                Ok((s, n, published.map(|(a, b)| (f64::from_bits(a), f64::from_bits(b))), cell_seed, outcomes))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (s, n, published, cell_seed, outcomes) in per_cell {
        let builder = RowBuilder::new(&config, trials, cell_seed).cell(|r| {
            r.degree = Some(degree);
            r.n = Some(n);
            r.s = Some(s);
            r.sigma = Some(sigma);
        });
        let (e0, e2, kappa, singular) = summarize_lfr(&outcomes);
        rows.push(builder.row("lfr", "mean_e0", e0, published.map(|p| p.0)));
        rows.push(builder.row("lfr", "mean_e2", e2, published.map(|p| p.1)));
        rows.push(builder.row("lfr", "mean_cumulative_kappa", kappa, None));
        rows.push(builder.row("lfr", "n_singular", singular as f64, None));
    }
    Ok(ExperimentResult {
        config,
        rows,
        timings: watch.finish(),
    })
}

/// `(E0, E2, cumulative kappa)` of a trial, `None` when a block was near singular.
type LfrOutcome = Option<(f64, f64, f64)>;

fn lfr_trials(n: usize, degree: usize, s: f64, sigma: f64, variant: LfrVariant, trials: usize, cell_seed: u64) -> Result<Vec<LfrOutcome>> {
    (0..trials)
        .map(|t| {
            let p = lfr::simulate_problem(n, degree, s, sigma, variant, derive_seed(cell_seed, &format!("trial/{t}")))?;
            match lfr::lfr_fit(&p) {
                Ok(model) => {
                    let e = lfr::model_errors(&model, &p)?;
                    Ok(Some((e.e0, e.e2, model.cumulative_kappa)))
                }
                Err(Error::BlockFailure { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn summarize_lfr(outcomes: &[LfrOutcome]) -> (f64, f64, f64, usize) {
    let ok: Vec<(f64, f64, f64)> = outcomes.iter().flatten().copied().collect();
    let mean_of = |f: fn(&(f64, f64, f64)) -> f64| {
        let v: Vec<f64> = ok.iter().map(f).collect();
        finite_mean_std(&v).0
    };
    (mean_of(|o| o.0), mean_of(|o| o.1), mean_of(|o| o.2), outcomes.len() - ok.len())
}

/// A single LFR configuration, with the risk of the truncated slope when a level is given.
pub fn run_custom_lfr(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved();
    config.validate()?;
    let trials = config.trials.unwrap_or(10);
    let (n, degree) = (config.n.unwrap_or(200), config.degree.unwrap_or(50));
    let (s, sigma) = (config.s.unwrap_or(2.0), config.sigma.unwrap_or(0.5));
    let variant = config.variant.unwrap_or(LfrVariant::Example3);
    let cell_seed = derive_seed(config.seed, &format!("lfr/{}/{s}/{n}/{degree}/{sigma}", variant.label()));
    let mut watch = Stopwatch::new();
    let outcomes = watch.time("lfr_fit", || lfr_trials(n, degree, s, sigma, variant, trials, cell_seed))?;
    let (e0, e2, kappa, singular) = summarize_lfr(&outcomes);
    let builder = RowBuilder::new(&config, trials, cell_seed).cell(|r| {
        r.degree = Some(degree);
        r.n = Some(n);
        r.s = Some(s);
        r.sigma = Some(sigma);
    });
    let mut rows = vec![
        builder.row(variant.label(), "mean_e0", e0, None),
        builder.row(variant.label(), "mean_e2", e2, None),
        builder.row(variant.label(), "mean_cumulative_kappa", kappa, None),
        builder.row(variant.label(), "n_singular", singular as f64, None),
    ];
    if degree >= 2 {
        rows.push(builder.row("envelope", "cumulative_kappa_bound", lfr::cumulative_kappa_envelope(s, degree), None));
    }
    if let Some(level) = config.truncation {
        let risk_config = LfrRiskConfig {
            n,
            degree,
            s,
            sigma,
            variant,
            level,
            trials,
            r: 1.0,
            eta: None,
            seed: derive_seed(cell_seed, "risk"),
        };
        let risk = watch.time("lfr_risk", || lfr::lfr_risk_mc(&risk_config))?;
        rows.push(builder.row("truncated", "empirical_risk", risk.empirical_risk, None));
        rows.push(builder.row("truncated", "risk_bound", risk.theorem7_bound, None));
        rows.push(builder.row("truncated", "n_singular_blocks", risk.n_singular_blocks as f64, None));
    }
    Ok(ExperimentResult {
        config,
        rows,
        timings: watch.finish(),
    })
}
