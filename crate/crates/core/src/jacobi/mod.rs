//! Orthonormal Jacobi polynomials on `[-1, 1]` and their rescaled copies on `[0, 1]`.
//!
//! For `alpha, beta >= -1/2` the weight is `w(x) = (1 - x)^alpha (1 + x)^beta` and the
//! normalized polynomials satisfy `∫ P_j P_k w dx = δ_jk`. Evaluation always goes
//! through the three-term recurrence for the classical polynomials followed by a
//! division by `sqrt(h_k)`.

mod quadrature;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub use quadrature::{gauss_jacobi_rule, omega_norm, QuadratureRule};

/// Weight parameters of the Jacobi family with the derived constants used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct JacobiParams {
    alpha: f64,
    beta: f64,
    mu: f64,
    c_ab: f64,
    gamma_ab: f64,
    eta_ab: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawParams> for JacobiParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        JacobiParams::new(raw.alpha, raw.beta)
    }
}

impl From<JacobiParams> for RawParams {
    fn from(p: JacobiParams) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha < -0.5 || beta < -0.5 {
            return Err(Error::InvalidArgument(format!(
                "Jacobi parameters must satisfy alpha, beta >= -1/2 (got alpha={alpha}, beta={beta})"
            )));
        }
        let mu = alpha.max(beta);
        let c_ab = (alpha + beta + 1.0) / 2.0;
        let gamma_ab = ((alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(alpha + beta + 2.0))
        .exp();
        let exponent = 2.0 * mu.max(0.0) / 12.0 + (mu * mu + alpha * beta).max(0.0) / 8.0;
        let eta_ab = exponent.exp() / (2f64.powf((alpha + beta) / 2.0) * ln_gamma(mu + 1.0).exp());
        Ok(Self {
            alpha,
            beta,
            mu,
            c_ab,
            gamma_ab,
            eta_ab,
        })
    }

    /// Chebyshev (first kind) parameters `alpha = beta = -1/2`.
    pub fn chebyshev() -> Self {
        Self::new(-0.5, -0.5).expect("valid parameters")
    }

    /// Legendre parameters `alpha = beta = 0`.
    pub fn legendre() -> Self {
        Self::new(0.0, 0.0).expect("valid parameters")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `max(alpha, beta)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `(alpha + beta + 1) / 2`.
    pub fn c_ab(&self) -> f64 {
        self.c_ab
    }

    /// Total mass of the weight, `2^(alpha+beta+1) B(alpha+1, beta+1)`.
    pub fn gamma_ab(&self) -> f64 {
        self.gamma_ab
    }

    /// Constant of the uniform bound `max |P_k| <= eta * k^mu * sqrt(k + c)`.
    pub fn eta_ab(&self) -> f64 {
        self.eta_ab
    }

    pub fn is_chebyshev(&self) -> bool {
        self.alpha == -0.5 && self.beta == -0.5
    }

    /// Weight `(1 - x)^alpha (1 + x)^beta`; infinite at an endpoint with a negative exponent.
    pub fn weight(&self, x: f64) -> f64 {
        (1.0 - x).powf(self.alpha) * (1.0 + x).powf(self.beta)
    }

    /// Squared norm `h_k` of the classical polynomial `P_k`.
    ///
    /// At `k = 0` the closed form is `0/0` when `alpha + beta = -1`; the limit
    /// value `gamma_ab` is used for every parameter pair.
    pub fn norm_constant(&self, k: usize) -> f64 {
        if k == 0 {
            return self.gamma_ab;
        }
        let (a, b) = (self.alpha, self.beta);
        let kf = k as f64;
        ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(kf + a + 1.0) + ln_gamma(kf + b + 1.0)
            - ln_gamma(kf + 1.0)
            - (2.0 * kf + a + b + 1.0).ln()
            - ln_gamma(kf + a + b + 1.0))
        .exp()
    }

    /// The same weight with `alpha` and `beta` exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.beta, self.alpha).expect("swapping preserves validity")
    }
}

/// Interval the basis lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[-1, 1]` with polynomials `P_k`.
    Symmetric,
    /// `[0, 1]` with `Q_k(x) = P_k(2x - 1) / sqrt(2)`.
    Unit,
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Domain::Symmetric => (-1.0, 1.0),
            Domain::Unit => (0.0, 1.0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.bounds();
        (lo..=hi).contains(&x)
    }

    /// Map a point of this domain to `[-1, 1]`.
    pub fn to_symmetric(&self, x: f64) -> f64 {
        match self {
            Domain::Symmetric => x,
            Domain::Unit => 2.0 * x - 1.0,
        }
    }

    /// Map a point of `[-1, 1]` to this domain.
    pub fn from_symmetric(&self, t: f64) -> f64 {
        match self {
            Domain::Symmetric => t,
            Domain::Unit => (t + 1.0) / 2.0,
        }
    }

    pub(crate) fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            let (lo, hi) = self.bounds();
            Err(Error::Domain { x, lo, hi })
        }
    }
}

/// The first `degree + 1` orthonormal Jacobi polynomials on a chosen domain.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiBasis {
    params: JacobiParams,
    degree: usize,
    domain: Domain,
    norm_constants: Vec<f64>,
    inv_sqrt_norms: Vec<f64>,
}

impl JacobiBasis {
    pub fn new(params: JacobiParams, degree: usize, domain: Domain) -> Self {
        let norm_constants: Vec<f64> = (0..=degree).map(|k| params.norm_constant(k)).collect();
        let scale = match domain {
            Domain::Symmetric => 1.0,
            Domain::Unit => std::f64::consts::FRAC_1_SQRT_2,
        };
        let inv_sqrt_norms = norm_constants.iter().map(|h| scale / h.sqrt()).collect();
        Self {
            params,
            degree,
            domain,
            norm_constants,
            inv_sqrt_norms,
        }
    }

    pub fn symmetric(params: JacobiParams, degree: usize) -> Self {
        Self::new(params, degree, Domain::Symmetric)
    }

    pub fn params(&self) -> &JacobiParams {
        &self.params
    }

    /// Highest polynomial degree `N`; the basis has `N + 1` elements.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `h_k` for `k = 0..=N`.
    pub fn norm_constants(&self) -> &[f64] {
        &self.norm_constants
    }

    /// Weight under which this basis is orthonormal. On the unit domain this is
    /// `4 w(2x - 1)`, the pull-back of `w` that matches the `1/sqrt(2)` scaling.
    pub fn weight(&self, x: f64) -> f64 {
        match self.domain {
            Domain::Symmetric => self.params.weight(x),
            Domain::Unit => 4.0 * self.params.weight(2.0 * x - 1.0),
        }
    }

    /// Value of the `k`-th orthonormal polynomial at `x`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k > self.degree {
            return Err(Error::Degree {
                k,
                max: self.degree,
            });
        }
        self.domain.check(x)?;
        let t = self.domain.to_symmetric(x);
        let mut value = 0.0;
        recurrence(&self.params, t, k, |j, p| {
            if j == k {
                value = p;
            }
        });
        Ok(value * self.inv_sqrt_norms[k])
    }

    /// All `N + 1` basis values at `x` from one recurrence pass.
    pub fn eval_row(&self, x: f64) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.len()];
        self.eval_row_into(x, &mut row)?;
        Ok(row)
    }

    pub fn eval_row_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: out.len(),
            });
        }
        self.domain.check(x)?;
        let t = self.domain.to_symmetric(x);
        let inv = &self.inv_sqrt_norms;
        recurrence(&self.params, t, self.degree, |j, p| out[j] = p * inv[j]);
        Ok(())
    }

    /// Evaluate `Σ coeffs[k] P_k(x)`.
    pub fn eval_series(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        self.domain.check(x)?;
        let t = self.domain.to_symmetric(x);
        let mut acc = 0.0;
        let inv = &self.inv_sqrt_norms;
        recurrence(&self.params, t, self.degree, |j, p| acc += coeffs[j] * p * inv[j]);
        Ok(acc)
    }

    /// Gauss rule of the given order on this basis' domain and weight.
    pub fn quadrature(&self, order: usize) -> Result<QuadratureRule> {
        let rule = gauss_jacobi_rule(&self.params, order)?;
        Ok(match self.domain {
            Domain::Symmetric => rule,
            Domain::Unit => rule.to_unit_interval(),
        })
    }

    /// Default rule order `N + 10`, exact for polynomial integrands up to degree `2N + 19`.
    pub fn default_quadrature(&self) -> Result<QuadratureRule> {
        self.quadrature(self.degree + 10)
    }

    /// Projection coefficients `<f, P_k>_w` computed with `rule`.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F, rule: &QuadratureRule) -> Result<Vec<f64>> {
        let mut coeffs = vec![0.0; self.len()];
        let mut row = vec![0.0; self.len()];
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            self.eval_row_into(x, &mut row)?;
            let fx = f(x);
            for (c, p) in coeffs.iter_mut().zip(&row) {
                *c += w * fx * p;
            }
        }
        Ok(coeffs)
    }
}

/// Drive the three-term recurrence for the classical polynomials `P_0..=P_kmax` at
/// `t in [-1, 1]`, calling `emit(j, P_j(t))` in order.
fn recurrence(params: &JacobiParams, t: f64, kmax: usize, mut emit: impl FnMut(usize, f64)) {
    let (a, b) = (params.alpha, params.beta);
    let mut prev = 1.0;
    emit(0, prev);
    if kmax == 0 {
        return;
    }
    let mut cur = 0.5 * ((a - b) + (a + b + 2.0) * t);
    emit(1, cur);
    for n in 2..=kmax {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let lead = 2.0 * nf * (nf + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * t + a * a - b * b);
        let c2 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
        let next = (c1 * cur - c2 * prev) / lead;
        prev = cur;
        cur = next;
        emit(n, cur);
    }
}

/// Uniform bound `eta * k^mu * sqrt(k + c)` on `max |P_k|` over `[-1, 1]`, for `k >= 2`.
pub fn uniform_bound(params: &JacobiParams, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::UnsupportedDegree(k));
    }
    let kf = k as f64;
    Ok(params.eta_ab * kf.powf(params.mu) * (kf + params.c_ab).sqrt())
}

/// Equispaced grid of `points` values covering `[lo, hi]` including both endpoints.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "grid needs at least two points");
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}
