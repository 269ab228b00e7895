//! Nonparametric regression by random pseudo-inverse over an orthonormal Jacobi basis.
//!
//! Given samples `(X_j, Y_j)` the coefficients solve `B C = Y / sqrt(n)` in the
//! least-squares sense; the optional truncation clamps predictions to `[-M, M]`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{uniform_grid, Domain, JacobiBasis, JacobiParams, QuadratureRule};
use crate::randsample::{self, derive_seed, NoiseSpec, StreamRng};
use crate::specdiag::{self, DesignMatrix, SpectralReport, TheoryBounds};

/// Grid size used for sup-norms and truncation checks.
pub const GRID_POINTS: usize = 2001;

/// Total mass of the weight the basis is orthonormal under. On `[0, 1]` the
/// weight `4 w(2x - 1)` has twice the mass of `w`.
pub fn effective_gamma(basis: &JacobiBasis) -> f64 {
    match basis.domain() {
        Domain::Symmetric => basis.params().gamma_ab(),
        Domain::Unit => 2.0 * basis.params().gamma_ab(),
    }
}

/// Fitted expansion `f(x) = Σ c_k P_k(x)`, optionally truncated at level `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpregModel {
    basis: JacobiBasis,
    coeffs: Vec<f64>,
    fit_report: Option<SpectralReport>,
    truncation_level: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    alpha: f64,
    beta: f64,
    #[serde(rename = "N")]
    degree: usize,
    domain: Domain,
    coeffs: Vec<f64>,
    truncation_level: Option<f64>,
}

impl NpregModel {
    pub fn from_coeffs(basis: JacobiBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            basis,
            coeffs,
            fit_report: None,
            truncation_level: None,
        })
    }

    pub fn basis(&self) -> &JacobiBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Spectrum of the Gram matrix the model was fitted with.
    pub fn fit_report(&self) -> Option<&SpectralReport> {
        self.fit_report.as_ref()
    }

    pub fn truncation_level(&self) -> Option<f64> {
        self.truncation_level
    }

    pub fn with_truncation(mut self, level: Option<f64>) -> Result<Self> {
        if let Some(m) = level {
            if !(m >= 0.0) {
                return Err(Error::InvalidArgument(format!("truncation level must be >= 0, got {m}")));
            }
        }
        self.truncation_level = level;
        Ok(self)
    }

    /// Untruncated expansion value.
    pub fn predict_raw(&self, x: f64) -> Result<f64> {
        self.basis.eval_series(&self.coeffs, x)
    }

    pub fn predict(&self, x: f64) -> Result<f64> {
        let v = self.predict_raw(x)?;
        Ok(match self.truncation_level {
            Some(m) => truncate(v, m),
            None => v,
        })
    }

    pub fn predict_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }

    /// Mean squared error of the predictions against `(xs, ys)`.
    pub fn mse(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let mut total = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            total += (self.predict(x)? - y).powi(2);
        }
        Ok(total / xs.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            alpha: self.basis.params().alpha(),
            beta: self.basis.params().beta(),
            degree: self.basis.degree(),
            domain: self.basis.domain(),
            coeffs: self.coeffs.clone(),
            truncation_level: self.truncation_level,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        let params = JacobiParams::new(file.alpha, file.beta)?;
        let basis = JacobiBasis::new(params, file.degree, file.domain);
        Self::from_coeffs(basis, file.coeffs)?.with_truncation(file.truncation_level)
    }
}

/// `sign(v) * min(m, |v|)`.
pub fn truncate(v: f64, m: f64) -> f64 {
    v.signum() * m.min(v.abs())
}

/// Least-squares coefficients for `design` and outputs `y`, via QR of `B`.
pub fn fit(design: &DesignMatrix, y: &[f64]) -> Result<NpregModel> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let report = specdiag::spectral_report(&design.gram())?;
    if report.near_singular {
        return Err(Error::NearSingular(Box::new(report)));
    }
    let coeffs = solve_least_squares(design.entries(), y)?;
    Ok(NpregModel {
        basis: design.basis().clone(),
        coeffs,
        fit_report: Some(report),
        truncation_level: None,
    })
}

/// Build the design for `points` and fit.
pub fn fit_points(basis: &JacobiBasis, points: &[f64], y: &[f64]) -> Result<NpregModel> {
    fit(&DesignMatrix::from_points(basis, points)?, y)
}

fn solve_least_squares(b: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let scale = 1.0 / (y.len() as f64).sqrt();
    let z = DVector::from_iterator(y.len(), y.iter().map(|v| v * scale));
    let qr = b.clone().qr();
    let qtz = qr.q().tr_mul(&z);
    let sol = qr
        .r()
        .solve_upper_triangular(&qtz)
        .ok_or_else(|| Error::InvalidArgument("triangular factor is singular".into()))?;
    Ok(sol.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Subsample size; `None` means `ceil(0.57 n)`.
    pub subset_size: Option<usize>,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            subset_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub model: NpregModel,
    /// Full-set mean squared error of the chosen model.
    pub score: f64,
    /// Sorted indices of the subsample the model was fitted on.
    pub subset: Vec<usize>,
    pub iteration: usize,
    pub singular_iterations: usize,
}

/// Default subsample size `ceil(0.57 n)`.
pub fn default_subset_size(n: usize) -> usize {
    (0.57 * n as f64).ceil() as usize
}

/// Fit on random subsamples and keep the model with the lowest mean squared
/// error over all of `(points, y)`.
pub fn ransac_fit(basis: &JacobiBasis, points: &[f64], y: &[f64], config: &RansacConfig) -> Result<RansacResult> {
    let n = points.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if config.iterations < 1 {
        return Err(Error::InvalidArgument("RANSAC needs at least one iteration".into()));
    }
    let m = config.subset_size.unwrap_or_else(|| default_subset_size(n));
    if m < basis.len() || m > n {
        return Err(Error::InvalidArgument(format!(
            "RANSAC subset size {m} must lie in [{}, {n}]",
            basis.len()
        )));
    }
    let mut best: Option<RansacResult> = None;
    let mut singular = 0;
    for it in 0..config.iterations {
        let mut rng = StreamRng::seed_from_u64(derive_seed(config.seed, &format!("ransac/{it}")));
        let mut subset = index::sample(&mut rng, n, m).into_vec();
        subset.sort_unstable();
        let sub_x: Vec<f64> = subset.iter().map(|&i| points[i]).collect();
        let sub_y: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
        let model = match fit_points(basis, &sub_x, &sub_y) {
            Ok(model) => model,
            Err(Error::NearSingular(_)) => {
                singular += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = model.mse(points, y)?;
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(RansacResult {
                model,
                score,
                subset,
                iteration: it,
                singular_iterations: 0,
            });
        }
    }
    let mut best = best.ok_or(Error::RobustFitFailure(config.iterations))?;
    best.singular_iterations = singular;
    Ok(best)
}

/// Error budget of a fit against a known target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// `||f - f_hat||_w`.
    pub error_omega: f64,
    pub proj_coeffs: Vec<f64>,
    /// `||f - pi_N f||_w`.
    pub proj_error_omega: f64,
    /// `||f - pi_N f||_inf` over a grid.
    pub proj_error_sup: f64,
    pub proj_norm_omega: f64,
    pub proj_norm_sup: f64,
    /// `max |eps_i|`.
    pub eta_n: f64,
    pub delta: f64,
    /// Right-hand side of the high-probability error bound; `None` when its denominator is not positive.
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub residual_mse: f64,
    pub kappa2: f64,
    pub theory: Option<TheoryBounds>,
    pub error_budget: Option<ErrorBudget>,
}

/// Observed data and noise of a synthetic fit.
#[derive(Debug, Clone, Copy)]
pub struct FitData<'a> {
    pub points: &'a [f64],
    pub y: &'a [f64],
    pub noise: &'a [f64],
}

/// Diagnostics of `model` for a synthetic run with known target `f`.
///
/// `rule` is used for the `w`-norms; projection coefficients use a Gauss rule
/// of order `proj_order` (default `N + 12`).
pub fn error_report<F: Fn(f64) -> f64>(
    model: &NpregModel,
    f: F,
    data: FitData<'_>,
    rule: &QuadratureRule,
    proj_order: Option<usize>,
    delta: f64,
) -> Result<FitDiagnostics> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let basis = model.basis();
    let residual_mse = model.mse(data.points, data.y)?;
    let kappa2 = match model.fit_report() {
        Some(r) => r.kappa2,
        None => specdiag::spectral_report(&DesignMatrix::from_points(basis, data.points)?.gram())?.kappa2,
    };
    let theory = specdiag::theory_bounds(basis.params(), data.points.len(), basis.degree(), false).ok();

    let proj_rule = basis.quadrature(proj_order.unwrap_or(basis.degree() + 12))?;
    let proj_coeffs = basis.project(&f, &proj_rule)?;
    let proj = NpregModel::from_coeffs(basis.clone(), proj_coeffs.clone())?;
    let error_omega = rule
        .integrate(|x| (f(x) - model.predict(x).unwrap_or(f64::NAN)).powi(2))
        .max(0.0)
        .sqrt();
    let proj_error_omega = rule
        .integrate(|x| (f(x) - proj.predict_raw(x).unwrap_or(f64::NAN)).powi(2))
        .max(0.0)
        .sqrt();
    let proj_norm_omega = proj_coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let (lo, hi) = basis.domain().bounds();
    let mut proj_error_sup = 0.0f64;
    let mut proj_norm_sup = 0.0f64;
    for x in uniform_grid(lo, hi, GRID_POINTS) {
        let p = proj.predict_raw(x)?;
        proj_error_sup = proj_error_sup.max((f(x) - p).abs());
        proj_norm_sup = proj_norm_sup.max(p.abs());
    }
    let eta_n = data.noise.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let bound = theorem4_bound(&Theorem4Inputs {
        gamma: effective_gamma(basis),
        n: data.points.len(),
        delta,
        kappa2,
        proj_error_omega,
        proj_error_sup,
        proj_norm_omega,
        proj_norm_sup,
        eta_n,
    });
    Ok(FitDiagnostics {
        residual_mse,
        kappa2,
        theory,
        error_budget: Some(ErrorBudget {
            error_omega,
            proj_coeffs,
            proj_error_omega,
            proj_error_sup,
            proj_norm_omega,
            proj_norm_sup,
            eta_n,
            delta,
            bound,
            bound_satisfied: bound.map(|b| error_omega <= b),
        }),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Theorem4Inputs {
    pub gamma: f64,
    pub n: usize,
    pub delta: f64,
    pub kappa2: f64,
    pub proj_error_omega: f64,
    pub proj_error_sup: f64,
    pub proj_norm_omega: f64,
    pub proj_norm_sup: f64,
    pub eta_n: f64,
}

/// High-probability bound on `||f - f_hat||_w`; `None` when the denominator is
/// not positive or the projection vanishes.
pub fn theorem4_bound(t: &Theorem4Inputs) -> Option<f64> {
    if t.proj_norm_omega <= 0.0 || !t.kappa2.is_finite() {
        return None;
    }
    let q = ((2.0 / t.delta).ln() / t.n as f64).powf(0.25);
    let inv_sqrt_gamma = 1.0 / t.gamma.sqrt();
    let denom = inv_sqrt_gamma - q * t.proj_norm_sup / t.proj_norm_omega;
    if denom <= 0.0 {
        return None;
    }
    let numer = q * t.proj_error_sup + t.proj_error_omega * inv_sqrt_gamma + t.eta_n;
    Some(t.proj_error_omega + (2.0 * t.kappa2).sqrt() * numer / denom)
}

/// Rate terms for a target with `p` Lipschitz-`g` derivatives, with unit constants:
/// `(log N / N^(p+g), log N / N^(p+g-mu-1/2))` for the `w`-norm and sup-norm projection errors.
pub fn smooth_rates(degree: usize, smoothness: f64, mu: f64) -> (f64, f64) {
    let nf = degree as f64;
    let l = nf.ln();
    (l / nf.powf(smoothness), l / nf.powf(smoothness - mu - 0.5))
}

/// Projection error constants for a `c`-bandlimited target, reported with `C_alpha = 1`:
/// `(c^(-1/2) (e c / (2N + 2))^(N+2), c^alpha (e c / (2N + 2))^(N + 3/2 - alpha))`.
pub fn bandlimited_rates(alpha: f64, bandwidth: f64, degree: usize) -> (f64, f64) {
    let nf = degree as f64;
    let ratio = std::f64::consts::E * bandwidth / (2.0 * nf + 2.0);
    (
        bandwidth.powf(-0.5) * ratio.powf(nf + 2.0),
        bandwidth.powf(alpha) * ratio.powf(nf + 1.5 - alpha),
    )
}

/// Weierstrass function `Σ_k cos(2^k pi x) / 2^(k s)`, summed until the tail is below `tol`.
pub fn weierstrass(s: f64, x: f64, tol: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("Weierstrass series diverges for s = {s}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Domain::Symmetric.check(x)?;
    let ratio = 2f64.powf(-s);
    let k_max = weierstrass_terms(s, tol);
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut freq = std::f64::consts::PI;
    for _ in 0..=k_max {
        total += weight * (freq * x).cos();
        weight *= ratio;
        freq *= 2.0;
    }
    Ok(total)
}

/// Smallest `K` with `2^(-(K+1)s) / (1 - 2^(-s)) < tol`.
pub fn weierstrass_terms(s: f64, tol: f64) -> usize {
    let ratio = 2f64.powf(-s);
    let mut k = 0usize;
    while ratio.powi(k as i32 + 1) / (1.0 - ratio) >= tol {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub params: JacobiParams,
    pub n: usize,
    pub degree: usize,
    /// Truncation level `M`; the target must satisfy `|f| <= M`.
    pub level: f64,
    pub sigma: f64,
    pub trials: usize,
    pub r: f64,
    pub c: f64,
    pub seed: u64,
    /// Gauss rule order for the `w`-norms.
    pub quadrature_order: usize,
}

impl RiskConfig {
    pub fn new(params: JacobiParams, n: usize, degree: usize, level: f64, sigma: f64, trials: usize, seed: u64) -> Self {
        Self {
            params,
            n,
            degree,
            level,
            sigma,
            trials,
            r: 1.0,
            c: 0.5,
            seed,
            quadrature_order: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTrial {
    pub seed: u64,
    pub risk: f64,
    pub near_singular: bool,
    /// Fitted (untruncated) coefficients; empty for a singular design.
    pub coeffs: Vec<f64>,
    /// Pointwise truncation properties held on the grid.
    pub dominance_ok: bool,
    pub clamp_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskResult {
    pub empirical_risk: f64,
    pub theorem5_bound: f64,
    pub proj_error_sq: f64,
    pub n_singular: usize,
    pub trials: Vec<RiskTrial>,
}

/// Left side of the truncation precondition, `0.63 - L_N log(N+1)/n - n^(-r)`.
pub fn truncation_margin(params: &JacobiParams, n: usize, degree: usize, r: f64) -> f64 {
    let np1 = (degree + 1) as f64;
    let nf = n as f64;
    0.63 - specdiag::m_squared(params) * np1.powf(2.0 * params.mu() + 2.0) * np1.ln() / nf - nf.powf(-r)
}

/// Bound on `E ||f - f_trunc||_w^2`.
#[allow(clippy::too_many_arguments)]
pub fn theorem5_bound(params: &JacobiParams, n: usize, degree: usize, sigma: f64, proj_error_sq: f64, level: f64, r: f64, c: f64) -> f64 {
    let nf = n as f64;
    let gamma = params.gamma_ab();
    let l_n = specdiag::m_squared(params) * ((degree + 1) as f64).powf(2.0 * params.mu() + 2.0);
    (degree as f64 / nf * sigma * sigma + l_n / nf * proj_error_sq) / (gamma * c * c)
        + proj_error_sq
        + 4.0 * level * level * gamma * nf.powf(-r)
}

/// Monte Carlo `L2` risk of the truncated estimator on `[-1, 1]`.
///
/// A trial whose Gram matrix is near singular uses the zero estimator.
pub fn l2_risk_mc<F: Fn(f64) -> f64 + Sync>(config: &RiskConfig, f: F) -> Result<RiskResult> {
    if config.trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if !(config.c > 0.0 && config.c < 0.63) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, 0.63), got {}", config.c)));
    }
    let grid = uniform_grid(-1.0, 1.0, GRID_POINTS);
    let f_grid: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    if let Some(v) = f_grid.iter().find(|v| !(v.abs() <= config.level)) {
        return Err(Error::Precondition(format!(
            "target value {v} exceeds the truncation level {}",
            config.level
        )));
    }
    let margin = truncation_margin(&config.params, config.n, config.degree, config.r);
    if margin < config.c {
        return Err(Error::Precondition(format!(
            "sample size too small for the risk bound: margin {margin:.4} < c = {}",
            config.c
        )));
    }
    let basis = JacobiBasis::symmetric(config.params, config.degree);
    let rule = basis.quadrature(config.quadrature_order)?;
    let proj = basis.project(&f, &basis.quadrature(config.degree + 12)?)?;
    let proj_error_sq = rule
        .integrate(|x| (f(x) - basis.eval_series(&proj, x).unwrap_or(f64::NAN)).powi(2))
        .max(0.0);
    let bound = theorem5_bound(
        &config.params,
        config.n,
        config.degree,
        config.sigma,
        proj_error_sq,
        config.level,
        config.r,
        config.c,
    );

    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(config.seed, &format!("risk/{t}"));
            let xs = randsample::sample_beta_on_i(&config.params, config.n, derive_seed(seed, "points"))?;
            let noise = randsample::make_noise(&NoiseSpec::gaussian(config.sigma, derive_seed(seed, "noise")), config.n)?;
            let y: Vec<f64> = xs.points.iter().zip(&noise).map(|(&x, e)| f(x) + e).collect();
            let fitted = match fit_points(&basis, &xs.points, &y) {
                Ok(m) => Some(m.with_truncation(Some(config.level))?),
                Err(Error::NearSingular(_)) => None,
                Err(e) => return Err(e),
            };
            let Some(model) = fitted else {
                let risk = rule.integrate(|x| f(x).powi(2));
                return Ok(RiskTrial {
                    seed,
                    risk,
                    near_singular: true,
                    coeffs: Vec::new(),
                    dominance_ok: true,
                    clamp_ok: true,
                });
            };
            let risk = rule.integrate(|x| (f(x) - model.predict(x).unwrap_or(f64::NAN)).powi(2));
            let mut dominance_ok = true;
            let mut clamp_ok = true;
            for (&x, &fx) in grid.iter().zip(&f_grid) {
                let raw = model.predict_raw(x)?;
                let cut = truncate(raw, config.level);
                clamp_ok &= cut.abs() <= config.level;
                dominance_ok &= (fx - cut).abs() <= (fx - raw).abs();
            }
            Ok(RiskTrial {
                seed,
                risk,
                near_singular: false,
                coeffs: model.coeffs().to_vec(),
                dominance_ok,
                clamp_ok,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut risks: Vec<f64> = trials.iter().map(|t| t.risk).collect();
    risks.sort_by(f64::total_cmp);
    let empirical_risk = risks.iter().sum::<f64>() / risks.len() as f64;
    Ok(RiskResult {
        empirical_risk,
        theorem5_bound: bound,
        proj_error_sq,
        n_singular: trials.iter().filter(|t| t.near_singular).count(),
        trials,
    })
}
