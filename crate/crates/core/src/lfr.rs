//! Linear functional regression solved block by block over a dyadic partition.
//!
//! Predictors are `X_i(s) = Σ_j xi_j Z_ij phi_j(s)` for an orthonormal cosine
//! family `phi_j` on `[0, 1]`. For each block `I_k` of the partition the
//! coefficients of the slope function solve `G_k c = F_k^T Y^k / sqrt(n)` with
//! `F_k = [xi_j Z_ij] / sqrt(n)` and `G_k = F_k^T F_k`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::uniform_grid;
use crate::randsample::{derive_seed, make_noise, NoiseSpec, StreamRng};
use crate::specdiag::{spectral_report, SpectralReport};

/// Number of points of the evaluation grid on `[0, 1]`.
pub const SLOPE_GRID_POINTS: usize = 1001;

/// Inclusive 1-based index interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub degree: usize,
    pub blocks: Vec<Block>,
}

impl DyadicPartition {
    /// Number of non-empty blocks `K`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Blocks `[1, min(2, N)]` and `[2^(k-1) + 1, min(2^k, N)]` for `k >= 2`, empty ones dropped.
pub fn dyadic_partition(degree: usize) -> Result<DyadicPartition> {
    if degree < 1 {
        return Err(Error::InvalidArgument("partition size N must be >= 1".into()));
    }
    let mut blocks = vec![Block {
        start: 1,
        end: degree.min(2),
    }];
    let mut k = 2u32;
    while (1usize << (k - 1)) < degree {
        blocks.push(Block {
            start: (1usize << (k - 1)) + 1,
            end: (1usize << k).min(degree),
        });
        k += 1;
    }
    Ok(DyadicPartition { degree, blocks })
}

/// `phi_1 = 1`, `phi_j(s) = sqrt(2) cos(pi j s)` for `j >= 2`.
pub fn cosine_basis(j: usize, s: f64) -> f64 {
    if j == 1 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * (std::f64::consts::PI * j as f64 * s).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfrVariant {
    /// `xi_j = j^(-s)`.
    Table2,
    /// `xi_j = (-1)^(j+1) j^(-s/2)`.
    Example3,
}

impl LfrVariant {
    pub fn xi(&self, j: usize, s: f64) -> f64 {
        let jf = j as f64;
        match self {
            LfrVariant::Table2 => jf.powf(-s),
            LfrVariant::Example3 => alternating(j) * jf.powf(-s / 2.0),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LfrVariant::Table2 => "table2",
            LfrVariant::Example3 => "example3",
        }
    }
}

fn alternating(j: usize) -> f64 {
    if j % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Slope coefficients `c_j = 4 (-1)^(j+1) / j^2`.
pub fn example3_coeffs(degree: usize) -> Vec<f64> {
    (1..=degree).map(|j| 4.0 * alternating(j) / (j * j) as f64).collect()
}

/// A simulated problem instance with its per-block outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LfrProblem {
    pub n: usize,
    pub degree: usize,
    pub s: f64,
    pub sigma: f64,
    pub variant: LfrVariant,
    pub xi: Vec<f64>,
    pub true_coeffs: Vec<f64>,
    /// `n x N` score matrix.
    pub z: DMatrix<f64>,
    pub sigma_z: f64,
    pub partition: DyadicPartition,
    /// `Y^k` for each block, in partition order.
    pub outputs: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Draw scores `Z_ij ~ U(-sqrt 3, sqrt 3)` and per-block outputs
/// `Y_i^k = Σ_{j in I_k} xi_j Z_ij c_j + eps_i^k`.
pub fn simulate_problem(n: usize, degree: usize, s: f64, sigma: f64, variant: LfrVariant, seed: u64) -> Result<LfrProblem> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay exponent must be >= 0, got {s}")));
    }
    let partition = dyadic_partition(degree)?;
    let widest = partition.blocks.iter().map(Block::width).max().unwrap_or(1);
    if n < widest {
        return Err(Error::Underdetermined { rows: n, cols: widest });
    }
    let xi: Vec<f64> = (1..=degree).map(|j| variant.xi(j, s)).collect();
    let true_coeffs = example3_coeffs(degree);
    let half = 3f64.sqrt();
    let mut rng = StreamRng::seed_from_u64(derive_seed(seed, "lfr/scores"));
    // row-major fill keeps the draw order independent of N's storage layout
    let mut z = DMatrix::zeros(n, degree);
    for i in 0..n {
        for j in 0..degree {
            z[(i, j)] = rng.random_range(-half..=half);
        }
    }
    let mut outputs = Vec::with_capacity(partition.len());
    for (k, block) in partition.blocks.iter().enumerate() {
        let noise = make_noise(&NoiseSpec::gaussian(sigma, derive_seed(seed, &format!("lfr/noise/{k}"))), n)?;
        let y = (0..n)
            .map(|i| {
                let signal: f64 = block.indices().map(|j| xi[j - 1] * z[(i, j - 1)] * true_coeffs[j - 1]).sum();
                signal + noise[i]
            })
            .collect();
        outputs.push(y);
    }
    Ok(LfrProblem {
        n,
        degree,
        s,
        sigma,
        variant,
        xi,
        true_coeffs,
        z,
        sigma_z: 1.0,
        partition,
        outputs,
        seed,
    })
}

/// `(F_k, G_k)` for `block`.
pub fn block_gram(problem: &LfrProblem, block: Block) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if block.start < 1 || block.end > problem.degree || block.start > block.end {
        return Err(Error::InvalidArgument(format!(
            "block [{}, {}] outside [1, {}]",
            block.start, block.end, problem.degree
        )));
    }
    let scale = 1.0 / (problem.n as f64).sqrt();
    let f = DMatrix::from_fn(problem.n, block.width(), |i, c| {
        let j = block.start + c;
        problem.xi[j - 1] * problem.z[(i, j - 1)] * scale
    });
    let g = f.tr_mul(&f);
    Ok((f, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfrModel {
    pub partition: DyadicPartition,
    pub block_coeffs: Vec<Vec<f64>>,
    pub block_reports: Vec<SpectralReport>,
    /// `Σ_k kappa2(G_k)`.
    pub cumulative_kappa: f64,
    pub truncation_level: Option<f64>,
}

impl LfrModel {
    /// Coefficients `c_1..c_N` assembled in index order.
    pub fn coeffs(&self) -> Vec<f64> {
        self.block_coeffs.iter().flatten().copied().collect()
    }

    /// Untruncated slope estimate at `s`.
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * cosine_basis(i + 1, s))
            .sum()
    }
}

fn solve_block(f: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let scale = 1.0 / (y.len() as f64).sqrt();
    let z = DVector::from_iterator(y.len(), y.iter().map(|v| v * scale));
    let qr = f.clone().qr();
    let sol = qr
        .r()
        .solve_upper_triangular(&qr.q().tr_mul(&z))
        .ok_or_else(|| Error::InvalidArgument("triangular factor is singular".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Per-block least-squares coefficients; fails on the first near-singular block.
pub fn lfr_fit(problem: &LfrProblem) -> Result<LfrModel> {
    let fitted = fit_blocks(problem)?;
    let mut block_coeffs = Vec::with_capacity(fitted.len());
    let mut block_reports = Vec::with_capacity(fitted.len());
    for (k, (coeffs, report)) in fitted.into_iter().enumerate() {
        match coeffs {
            Some(c) => block_coeffs.push(c),
            None => {
                return Err(Error::BlockFailure {
                    block: k + 1,
                    report: Box::new(report),
                })
            }
        }
        block_reports.push(report);
    }
    let cumulative_kappa = block_reports.iter().map(|r| r.kappa2).sum();
    Ok(LfrModel {
        partition: problem.partition.clone(),
        block_coeffs,
        block_reports,
        cumulative_kappa,
        truncation_level: None,
    })
}

fn fit_blocks(problem: &LfrProblem) -> Result<Vec<(Option<Vec<f64>>, SpectralReport)>> {
    problem
        .partition
        .blocks
        .par_iter()
        .zip(problem.outputs.par_iter())
        .map(|(&block, y)| {
            let (f, g) = block_gram(problem, block)?;
            let report = spectral_report(&g)?;
            if report.near_singular {
                return Ok((None, report));
            }
            Ok((Some(solve_block(&f, y)?), report))
        })
        .collect()
}

/// Cumulative condition number only, without solving.
pub fn cumulative_kappa(problem: &LfrProblem) -> Result<(f64, Vec<SpectralReport>)> {
    let reports = problem
        .partition
        .blocks
        .par_iter()
        .map(|&block| spectral_report(&block_gram(problem, block)?.1))
        .collect::<Result<Vec<_>>>()?;
    Ok((reports.iter().map(|r| r.kappa2).sum(), reports))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfrErrors {
    pub e0: f64,
    pub e2: f64,
}

/// `E2 = Σ (c_j - c_hat_j)^2` and `E0 = Σ j^(-s) (c_j - c_hat_j)^2`.
pub fn lfr_errors(coeffs: &[f64], truth: &[f64], s: f64) -> Result<LfrErrors> {
    if coeffs.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: coeffs.len(),
        });
    }
    let (mut e0, mut e2) = (0.0, 0.0);
    for (j, (c, t)) in coeffs.iter().zip(truth).enumerate() {
        let d2 = (c - t).powi(2);
        e2 += d2;
        e0 += ((j + 1) as f64).powf(-s) * d2;
    }
    Ok(LfrErrors { e0, e2 })
}

pub fn model_errors(model: &LfrModel, problem: &LfrProblem) -> Result<LfrErrors> {
    lfr_errors(&model.coeffs(), &problem.true_coeffs, problem.s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem6Bound {
    pub block: usize,
    pub m_xi: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator is not positive.
    pub kappa_bound: Option<f64>,
}

/// High-probability bound on `kappa2(G_k)` for block number `block` (1-based),
/// with score bound `m_score` and slack `eta`.
pub fn theorem6_bound(problem: &LfrProblem, block: usize, m_score: f64, eta: f64) -> Result<Theorem6Bound> {
    let b = *problem
        .partition
        .blocks
        .get(block.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("no block number {block}")))?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    let var_z = problem.sigma_z * problem.sigma_z;
    let max_abs = problem.xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l1: f64 = problem.xi.iter().map(|x| x.abs()).sum();
    let m_xi = m_score * m_score * max_abs * l1;
    let sq: Vec<f64> = b.indices().map(|j| problem.xi[j - 1].powi(2)).collect();
    let max_sq = sq.iter().copied().fold(f64::MIN, f64::max);
    let min_sq = sq.iter().copied().fold(f64::MAX, f64::min);
    let spread = m_xi / problem.n as f64 * ((block - 1) as f64 * std::f64::consts::LN_2);
    let numerator = 1.72 * var_z * max_sq + spread + eta;
    let denominator = 0.63 * var_z * min_sq - spread - eta;
    Ok(Theorem6Bound {
        block,
        m_xi,
        numerator,
        denominator,
        kappa_bound: (denominator > 0.0).then(|| numerator / denominator),
    })
}

/// Cumulative condition number envelope `2^s * 1.72 log N / (0.63 log 2)` for `xi_j ~ j^(-s)`.
pub fn cumulative_kappa_envelope(s: f64, degree: usize) -> f64 {
    2f64.powf(s) * 1.72 * (degree as f64).ln() / (0.63 * std::f64::consts::LN_2)
}

/// `sign(b(x)) * min(level, |b(x)|)` on `grid`.
pub fn truncate_beta(model: &LfrModel, level: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be positive, got {level}")));
    }
    let coeffs = model.coeffs();
    Ok(grid
        .iter()
        .map(|&s| {
            let v = series(&coeffs, s);
            v.signum() * level.min(v.abs())
        })
        .collect())
}

fn series(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().enumerate().map(|(i, c)| c * cosine_basis(i + 1, s)).sum()
}

/// Trapezoid rule on an equispaced grid over `[0, 1]`.
fn trapezoid(values: &[f64]) -> f64 {
    let h = 1.0 / (values.len() - 1) as f64;
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfrRiskConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub degree: usize,
    pub s: f64,
    pub sigma: f64,
    pub variant: LfrVariant,
    pub level: f64,
    pub trials: usize,
    pub r: f64,
    /// Per-block lower eigenvalue levels; default `0.5 sigma_Z^2 min xi_j^2`.
    pub eta: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfrRiskResult {
    pub empirical_risk: f64,
    pub theorem7_bound: f64,
    pub eta: Vec<f64>,
    pub per_trial: Vec<f64>,
    pub n_singular_blocks: usize,
}

/// Default `eta_k = 0.5 sigma_Z^2 min_{j in I_k} xi_j^2`.
pub fn default_eta(problem: &LfrProblem) -> Vec<f64> {
    let var_z = problem.sigma_z.powi(2);
    problem
        .partition
        .blocks
        .iter()
        .map(|b| 0.5 * var_z * b.indices().map(|j| problem.xi[j - 1].powi(2)).fold(f64::MAX, f64::min))
        .collect()
}

/// `sigma_Z^2 ||xi||^2 / n^2 * Σ_k sigma^2 |I_k| / eta_k^2 + 4 L^2 K / n^r`.
pub fn theorem7_bound(problem: &LfrProblem, eta: &[f64], level: f64, r: f64) -> f64 {
    let nf = problem.n as f64;
    let xi_sq: f64 = problem.xi.iter().map(|x| x * x).sum();
    let blocks: f64 = problem
        .partition
        .blocks
        .iter()
        .zip(eta)
        .map(|(b, e)| problem.sigma.powi(2) / (e * e) * b.width() as f64)
        .sum();
    problem.sigma_z.powi(2) * xi_sq / (nf * nf) * blocks + 4.0 * level * level * problem.partition.len() as f64 / nf.powf(r)
}

/// Monte Carlo `L2` risk of the truncated slope estimate.
///
/// The risk of a trial is `||c_hat - c||^2` plus the change the truncation makes
/// to `∫ (b - b0)^2` on the grid. A near-singular block contributes zero coefficients.
pub fn lfr_risk_mc(config: &LfrRiskConfig) -> Result<LfrRiskResult> {
    if config.trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let grid = uniform_grid(0.0, 1.0, SLOPE_GRID_POINTS);
    let truth = example3_coeffs(config.degree);
    let beta0: Vec<f64> = grid.iter().map(|&s| series(&truth, s)).collect();
    if let Some(v) = beta0.iter().find(|v| !(v.abs() <= config.level)) {
        return Err(Error::Precondition(format!(
            "slope value {v} exceeds the truncation level {}",
            config.level
        )));
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let problem = simulate_problem(
                config.n,
                config.degree,
                config.s,
                config.sigma,
                config.variant,
                derive_seed(config.seed, &format!("lfr-risk/{t}")),
            )?;
            let fitted = fit_blocks(&problem)?;
            let singular = fitted.iter().filter(|(c, _)| c.is_none()).count();
            let coeffs: Vec<f64> = problem
                .partition
                .blocks
                .iter()
                .zip(&fitted)
                .flat_map(|(b, (c, _))| c.clone().unwrap_or_else(|| vec![0.0; b.width()]))
                .collect();
            let coeff_err: f64 = coeffs.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
            let raw: Vec<f64> = grid.iter().map(|&s| series(&coeffs, s)).collect();
            let raw_sq: Vec<f64> = raw.iter().zip(&beta0).map(|(v, b)| (v - b).powi(2)).collect();
            let cut_sq: Vec<f64> = raw
                .iter()
                .zip(&beta0)
                .map(|(v, b)| (v.signum() * config.level.min(v.abs()) - b).powi(2))
                .collect();
            let risk = coeff_err + trapezoid(&cut_sq) - trapezoid(&raw_sq);
            Ok((risk, singular, problem))
        })
        .collect::<Result<Vec<_>>>()?;
    let template = &trials[0].2;
    let eta = match &config.eta {
        Some(e) if e.len() == template.partition.len() => e.clone(),
        Some(e) => {
            return Err(Error::DimensionMismatch {
                expected: template.partition.len(),
                got: e.len(),
            })
        }
        None => default_eta(template),
    };
    let bound = theorem7_bound(template, &eta, config.level, config.r);
    let per_trial: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let mut sorted = per_trial.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LfrRiskResult {
        empirical_risk: sorted.iter().sum::<f64>() / sorted.len() as f64,
        theorem7_bound: bound,
        eta,
        per_trial,
        n_singular_blocks: trials.iter().map(|t| t.1).sum(),
    })
}
