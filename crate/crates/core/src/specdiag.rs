//! Random design matrices, their spectra, and the theoretical conditioning bounds.
//!
//! `B` has entries `P_k(X_j) / sqrt(n)` and `A = B^T B` is the Gram matrix whose
//! condition number governs the stability of the least-squares estimator.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{Domain, JacobiBasis, JacobiParams};
use crate::randsample::{self, derive_seed, SampleSet, SourceCdf};

/// Random projection matrix `B` (n rows, N + 1 columns) for a basis and a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    basis: JacobiBasis,
}

impl DesignMatrix {
    /// Fill `B` row by row from basis evaluations at `points`, scaled by `1/sqrt(n)`.
    pub fn from_points(basis: &JacobiBasis, points: &[f64]) -> Result<Self> {
        let n = points.len();
        let cols = basis.len();
        if n < cols {
            return Err(Error::Underdetermined { rows: n, cols });
        }
        let scale = 1.0 / (n as f64).sqrt();
        let mut entries = DMatrix::zeros(n, cols);
        let mut row = vec![0.0; cols];
        for (j, &x) in points.iter().enumerate() {
            basis.eval_row_into(x, &mut row)?;
            for (k, v) in row.iter().enumerate() {
                entries[(j, k)] = v * scale;
            }
        }
        Ok(Self {
            entries,
            basis: basis.clone(),
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn basis(&self) -> &JacobiBasis {
        &self.basis
    }

    /// Number of samples `n`.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// `A = B^T B`, symmetrized against rounding.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut a = self.entries.tr_mul(&self.entries);
        let m = a.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }
}

pub fn build_design(basis: &JacobiBasis, samples: &SampleSet) -> Result<DesignMatrix> {
    DesignMatrix::from_points(basis, &samples.points)
}

/// Eigen-structure summary of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `lambda_max / lambda_min`, infinite when `near_singular`.
    pub kappa2: f64,
    /// `(center, radius)` per row.
    pub gershgorin_discs: Vec<(f64, f64)>,
    pub near_singular: bool,
    pub tolerance: f64,
}

impl SpectralReport {
    /// Whether every eigenvalue lies in the union of the Gershgorin discs, up to `slack`.
    pub fn gershgorin_contains(&self, slack: f64) -> bool {
        self.eigenvalues.iter().all(|&l| {
            self.gershgorin_discs
                .iter()
                .any(|&(c, r)| (l - c).abs() <= r + slack)
        })
    }
}

/// Spectral report with the default scale-invariant tolerance `1e-12 * lambda_max`.
pub fn spectral_report(a: &DMatrix<f64>) -> Result<SpectralReport> {
    spectral_report_with_tolerance(a, None)
}

/// Spectral report; `near_singular` is `lambda_min <= tolerance`.
pub fn spectral_report_with_tolerance(a: &DMatrix<f64>, tolerance: Option<f64>) -> Result<SpectralReport> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let m = a.nrows();
    let mut asym = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if asym > 1e-8 || asym.is_nan() {
        return Err(Error::NotSymmetric(asym));
    }
    let gershgorin_discs = (0..m)
        .map(|i| {
            let radius = (0..m).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            (a[(i, i)], radius)
        })
        .collect();
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lambda_min = eigenvalues[0];
    let lambda_max = eigenvalues[m - 1];
    let tolerance = tolerance.unwrap_or(1e-12 * lambda_max.abs());
    let near_singular = lambda_min <= tolerance;
    let kappa2 = if near_singular {
        f64::INFINITY
    } else {
        lambda_max / lambda_min
    };
    Ok(SpectralReport {
        eigenvalues,
        lambda_min,
        lambda_max,
        kappa2,
        gershgorin_discs,
        near_singular,
        tolerance,
    })
}

/// Conditioning bounds for the Gram matrix of `n` samples and degree `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub degree: usize,
    /// The Chebyshev-specific constant was used for `m^2`.
    pub sharp: bool,
    pub m_ab: f64,
    pub m_sq: f64,
    /// `m^2 (N + 1)^(2 mu + 2)`.
    pub l_n: f64,
    pub eta_ab: f64,
    pub condition1_ok: bool,
    pub exp_lambda_max_upper: f64,
    pub exp_lambda_min_lower: f64,
}

impl TheoryBounds {
    /// High-probability bound on `kappa2(A)` holding with probability at least
    /// `(1 - delta)^2`; `None` when the denominator is not positive.
    pub fn kappa_bound(&self, delta: f64) -> Option<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return None;
        }
        let n = self.n as f64;
        let log_term = ((self.degree + 1) as f64).ln() / n;
        let dev = (2.0 / n * (2.0 / delta).ln()).sqrt();
        let t = self.l_n * (log_term + dev);
        let denom = 0.63 - t;
        (denom > 0.0).then(|| (1.72 + t) / denom)
    }
}

/// `m^2` of the generic bound: `(1 + sqrt(c/2)/2) / (mu + 3/2) * eta^2`.
pub fn m_squared(params: &JacobiParams) -> f64 {
    (1.0 + 0.5 * (params.c_ab() / 2.0).sqrt()) / (params.mu() + 1.5) * params.eta_ab().powi(2)
}

/// `m^2` for the Chebyshev weight, `2 / pi`.
pub const CHEBYSHEV_SHARP_M_SQ: f64 = std::f64::consts::FRAC_2_PI;

/// Evaluate the bound constants; `sharp` selects the Chebyshev-specific constant.
pub fn theory_bounds(params: &JacobiParams, n: usize, degree: usize, sharp: bool) -> Result<TheoryBounds> {
    if degree < 2 {
        return Err(Error::UnsupportedDegree(degree));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    if sharp && !params.is_chebyshev() {
        return Err(Error::InvalidArgument(
            "the sharp constant only applies to alpha = beta = -1/2".into(),
        ));
    }
    let m_sq = if sharp { CHEBYSHEV_SHARP_M_SQ } else { m_squared(params) };
    let np1 = (degree + 1) as f64;
    let l_n = m_sq * np1.powf(2.0 * params.mu() + 2.0);
    let nf = n as f64;
    let spread = l_n * np1.ln() / nf;
    Ok(TheoryBounds {
        alpha: params.alpha(),
        beta: params.beta(),
        n,
        degree,
        sharp,
        m_ab: m_sq.sqrt(),
        m_sq,
        l_n,
        eta_ab: params.eta_ab(),
        condition1_ok: 0.63 * nf > l_n * np1.ln(),
        exp_lambda_max_upper: 1.72 + spread,
        exp_lambda_min_lower: 0.63 - spread,
    })
}

/// How the sample points of a Monte Carlo trial are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingLaw {
    /// Directly from the weight law of the basis.
    Beta,
    /// Standard normal points pushed through the exact normal CDF.
    NormalExactCdf,
    /// Standard normal points pushed through their own empirical CDF.
    NormalEmpiricalCdf,
}

impl SamplingLaw {
    pub fn label(&self) -> &'static str {
        match self {
            SamplingLaw::Beta => "beta",
            SamplingLaw::NormalExactCdf => "normal_exact_cdf",
            SamplingLaw::NormalEmpiricalCdf => "normal_empirical_cdf",
        }
    }
}

/// Draw `n` points for `params` on `domain` according to `law`.
pub fn draw_points(params: &JacobiParams, n: usize, domain: Domain, law: SamplingLaw, seed: u64) -> Result<SampleSet> {
    match law {
        SamplingLaw::Beta => randsample::sample_beta(params, n, domain, seed),
        SamplingLaw::NormalExactCdf => {
            let normal = randsample::sample_standard_normal(n, seed)?;
            let cdf = randsample::standard_normal_cdf;
            randsample::cdf_transform(&normal, SourceCdf::Exact(&cdf), params, domain)
        }
        SamplingLaw::NormalEmpiricalCdf => {
            let normal = randsample::sample_standard_normal(n, seed)?;
            randsample::cdf_transform(&normal, SourceCdf::EmpiricalOfSample, params, domain)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: JacobiParams,
    pub n: usize,
    pub degree: usize,
    pub trials: usize,
    pub law: SamplingLaw,
    pub domain: Domain,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpectrum {
    pub trial: usize,
    pub seed: u64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa2: f64,
    pub near_singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub degree: usize,
    pub n: usize,
    pub trials: usize,
    pub law: SamplingLaw,
    /// Mean over non-singular trials; NaN when every trial was singular.
    pub mean_kappa2: f64,
    pub std: f64,
    pub n_singular: usize,
    pub per_trial: Vec<TrialSpectrum>,
}

/// Seed of trial `trial` of a Monte Carlo configuration.
pub fn trial_seed(config: &McConfig, trial: usize) -> u64 {
    let label = format!(
        "kappa/{}/{}/{}/{}/{}/{:?}/{}",
        config.params.alpha(),
        config.params.beta(),
        config.degree,
        config.n,
        config.law.label(),
        config.domain,
        trial
    );
    derive_seed(config.master_seed, &label)
}

/// Monte Carlo distribution of `kappa2(A)` over independent seeded designs.
pub fn mc_condition_number(config: &McConfig) -> Result<McSummary> {
    if config.trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let basis = JacobiBasis::new(config.params, config.degree, config.domain);
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config, trial);
            let samples = draw_points(&config.params, config.n, config.domain, config.law, seed)?;
            let design = build_design(&basis, &samples)?;
            let report = spectral_report(&design.gram())?;
            Ok(TrialSpectrum {
                trial,
                seed,
                lambda_min: report.lambda_min,
                lambda_max: report.lambda_max,
                kappa2: report.kappa2,
                near_singular: report.near_singular,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kappas: Vec<f64> = per_trial.iter().filter(|t| !t.near_singular).map(|t| t.kappa2).collect();
    kappas.sort_by(f64::total_cmp);
    let (mean_kappa2, std) = mean_std(&kappas);
    Ok(McSummary {
        alpha: config.params.alpha(),
        beta: config.params.beta(),
        degree: config.degree,
        n: config.n,
        trials: config.trials,
        law: config.law,
        mean_kappa2,
        std,
        n_singular: config.trials - kappas.len(),
        per_trial,
    })
}

/// Mean and sample standard deviation, summed in the given order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randsample::sample_beta_on_i;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_sample_constant_design() {
        let basis = JacobiBasis::symmetric(JacobiParams::legendre(), 0);
        let d = DesignMatrix::from_points(&basis, &[0.3]).unwrap();
        assert_eq!(d.entries().shape(), (1, 1));
        assert_abs_diff_eq!(d.entries()[(0, 0)], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn underdetermined_design_is_rejected() {
        let basis = JacobiBasis::symmetric(JacobiParams::legendre(), 3);
        assert!(matches!(
            DesignMatrix::from_points(&basis, &[0.1, 0.2, 0.3]),
            Err(Error::Underdetermined { rows: 3, cols: 4 })
        ));
    }

    #[test]
    fn gram_entries_are_sample_averages() {
        let p = JacobiParams::new(0.5, -0.5).unwrap();
        let basis = JacobiBasis::symmetric(p, 4);
        let s = sample_beta_on_i(&p, 30, 4).unwrap();
        let a = build_design(&basis, &s).unwrap().gram();
        for k in 0..5 {
            for l in 0..5 {
                let direct: f64 = s
                    .points
                    .iter()
                    .map(|&x| basis.eval(k, x).unwrap() * basis.eval(l, x).unwrap())
                    .sum::<f64>()
                    / 30.0;
                assert_abs_diff_eq!(a[(k, l)], direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gram_mean_is_scaled_identity() {
        // E[P_k(X) P_l(X)] = δ_kl / gamma_ab when X has density w / gamma_ab
        let p = JacobiParams::legendre();
        let basis = JacobiBasis::symmetric(p, 3);
        let s = sample_beta_on_i(&p, 100_000, 8).unwrap();
        let a = build_design(&basis, &s).unwrap().gram();
        for k in 0..4 {
            for l in 0..4 {
                let target = if k == l { 1.0 / p.gamma_ab() } else { 0.0 };
                assert!((a[(k, l)] - target).abs() < 0.05, "({k},{l}) = {}", a[(k, l)]);
                assert!((p.gamma_ab() * a[(k, l)] - target * p.gamma_ab()).abs() < 0.05);
            }
        }
    }

    #[test]
    fn spectral_examples() {
        let r = spectral_report(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!((r.lambda_min, r.lambda_max, r.kappa2), (1.0, 1.0, 1.0));
        let r = spectral_report(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(r.kappa2, 4.0, epsilon = 1e-14);
        assert_eq!(r.gershgorin_discs, vec![(4.0, 0.0), (1.0, 0.0)]);
        let r = spectral_report(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(r.lambda_min, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.lambda_max, 3.0, epsilon = 1e-14);
        assert!(r.gershgorin_contains(1e-9));
    }

    #[test]
    fn asymmetric_and_singular_inputs() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spectral_report(&a), Err(Error::NotSymmetric(_))));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = spectral_report(&s).unwrap();
        assert!(r.near_singular);
        assert!(r.kappa2.is_infinite());
    }

    #[test]
    fn bounds_by_direct_substitution() {
        let p = JacobiParams::legendre();
        let b = theory_bounds(&p, 40, 5, false).unwrap();
        // independent re-evaluation: eta = 1, c = 1/2, mu = 0
        let m_sq = (1.0 + 0.5 * 0.25f64.sqrt()) / 1.5;
        assert_abs_diff_eq!(b.m_sq, m_sq, epsilon = 1e-14);
        let l_n = m_sq * 36.0;
        assert_abs_diff_eq!(b.l_n, l_n, epsilon = 1e-12);
        assert_eq!(b.condition1_ok, 0.63 * 40.0 > l_n * 6f64.ln());
        assert!(!b.condition1_ok);
        assert!(matches!(theory_bounds(&p, 40, 1, false), Err(Error::UnsupportedDegree(1))));
    }

    #[test]
    fn sharp_chebyshev_bound() {
        let p = JacobiParams::chebyshev();
        let (n, deg) = (200, 5);
        let b = theory_bounds(&p, n, deg, true).unwrap();
        let t = std::f64::consts::FRAC_2_PI * 6.0 * 6f64.ln() / n as f64;
        assert_abs_diff_eq!(b.exp_lambda_max_upper / b.exp_lambda_min_lower, (1.72 + t) / (0.63 - t), epsilon = 1e-12);
        assert!(theory_bounds(&JacobiParams::legendre(), n, deg, true).is_err());
    }

    #[test]
    fn kappa_bound_limit() {
        let b = theory_bounds(&JacobiParams::chebyshev(), 1_000_000_000, 2, true).unwrap();
        assert_abs_diff_eq!(b.kappa_bound(1.0).unwrap(), 1.72 / 0.63, epsilon = 1e-3);
        let small = theory_bounds(&JacobiParams::legendre(), 10, 5, false).unwrap();
        assert!(small.kappa_bound(0.1).is_none());
    }

    #[test]
    fn single_column_kappa_is_one() {
        let config = McConfig {
            params: JacobiParams::legendre(),
            n: 7,
            degree: 0,
            trials: 5,
            law: SamplingLaw::Beta,
            domain: Domain::Symmetric,
            master_seed: 1,
        };
        let s = mc_condition_number(&config).unwrap();
        assert!(s.per_trial.iter().all(|t| t.kappa2 == 1.0));
        assert_eq!(s.mean_kappa2, 1.0);
    }

    #[test]
    fn mc_is_deterministic() {
        let config = McConfig {
            params: JacobiParams::chebyshev(),
            n: 40,
            degree: 5,
            trials: 8,
            law: SamplingLaw::NormalExactCdf,
            domain: Domain::Unit,
            master_seed: 99,
        };
        assert_eq!(mc_condition_number(&config).unwrap(), mc_condition_number(&config).unwrap());
    }
}
