//! Seeded random inputs: Beta-law sample points, CDF transforms from other laws, and noise.
//!
//! Every random stream is driven by a ChaCha8 generator whose seed is derived from
//! a master seed and a textual stream label, so independent streams can run in
//! any order or in parallel and still reproduce bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::jacobi::{Domain, JacobiParams};

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream named `label` under `master`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the master seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(master) ^ h)
}

pub fn stream_rng(master: u64, label: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, label))
}

/// Law that produced a [`SampleSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LawTag {
    /// Jacobi weight law `w / gamma_ab`, pushed to the set's domain.
    Beta { alpha: f64, beta: f64 },
    StandardNormal,
    /// Points pushed through a CDF transform onto the Beta law of `alpha, beta`.
    Transformed {
        source: Box<LawTag>,
        empirical: bool,
        alpha: f64,
        beta: f64,
    },
    Custom { name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<f64>,
    pub domain: Option<Domain>,
    pub law: LawTag,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Wrap externally produced points, validating them against `domain`.
    pub fn from_points(points: Vec<f64>, domain: Domain, name: &str) -> Result<Self> {
        for &x in &points {
            domain.check(x)?;
        }
        Ok(Self {
            points,
            domain: Some(domain),
            law: LawTag::Custom { name: name.into() },
            seed: 0,
        })
    }
}

/// Draw `n` points with density `w(x) / gamma_ab` on `[-1, 1]` (or its image on `[0, 1]`).
///
/// `u = G1 / (G1 + G2)` with `G1 ~ Gamma(beta + 1)`, `G2 ~ Gamma(alpha + 1)` is
/// `Beta(beta + 1, alpha + 1)` on `[0, 1]`, and `2u - 1` carries the Jacobi weight.
pub fn sample_beta(params: &JacobiParams, n: usize, domain: Domain, seed: u64) -> Result<SampleSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let g_beta = Gamma::new(params.beta() + 1.0, 1.0).expect("positive shape");
    let g_alpha = Gamma::new(params.alpha() + 1.0, 1.0).expect("positive shape");
    let points = (0..n)
        .map(|_| {
            let x1: f64 = g_beta.sample(&mut rng);
            let x2: f64 = g_alpha.sample(&mut rng);
            let u = x1 / (x1 + x2);
            domain.from_symmetric(2.0 * u - 1.0).clamp(domain.bounds().0, domain.bounds().1)
        })
        .collect();
    Ok(SampleSet {
        points,
        domain: Some(domain),
        law: LawTag::Beta {
            alpha: params.alpha(),
            beta: params.beta(),
        },
        seed,
    })
}

/// [`sample_beta`] on `[-1, 1]`.
pub fn sample_beta_on_i(params: &JacobiParams, n: usize, seed: u64) -> Result<SampleSet> {
    sample_beta(params, n, Domain::Symmetric, seed)
}

pub fn sample_standard_normal(n: usize, seed: u64) -> Result<SampleSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let points = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(SampleSet {
        points,
        domain: None,
        law: LawTag::StandardNormal,
        seed,
    })
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

/// Inverse of `x -> I_x(a, b)` on `[0, 1]`: bisection to a narrow bracket, then a
/// bracket-safeguarded Newton polish to `1e-12` in `t`.
pub fn inverse_regularized_beta(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain { x: t, lo: 0.0, hi: 1.0 });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if regularized_beta(a, b, mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let log_norm = ln_beta(a, b);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let resid = regularized_beta(a, b, x) - t;
        if resid.abs() <= 1e-15 {
            break;
        }
        if resid < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - log_norm).exp();
        let mut next = x - resid / density;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// `I^{-1}(alpha + 1, beta + 1)(t)`, the quantile of `Beta(alpha + 1, beta + 1)`.
///
/// For `alpha = beta = -1/2` the closed form `(1 + sin(pi t - pi/2)) / 2` is used.
pub fn inverse_beta_cdf(params: &JacobiParams, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain { x: t, lo: 0.0, hi: 1.0 });
    }
    if params.is_chebyshev() {
        return Ok(arcsine_quantile(t));
    }
    inverse_regularized_beta(params.alpha() + 1.0, params.beta() + 1.0, t)
}

/// Quantile of `Beta(1/2, 1/2)`.
pub fn arcsine_quantile(t: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    0.5 * (1.0 + (PI * t - FRAC_PI_2).sin())
}

/// Empirical distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    interpolate: bool,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empirical CDF needs at least one sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("empirical CDF sample contains NaN".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            sorted,
            interpolate: false,
        })
    }

    /// Linearly interpolate between consecutive order statistics.
    pub fn interpolated(mut self) -> Self {
        self.interpolate = true;
        self
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous `#{x_i <= x} / n`, optionally interpolated.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.sorted.len();
        let count = self.sorted.partition_point(|&v| v <= x);
        if !self.interpolate || count == 0 || count == n {
            return count as f64 / n as f64;
        }
        let prev = self.sorted[count - 1];
        let next = self.sorted[count];
        let frac = (x - prev) / (next - prev);
        (count as f64 + frac) / n as f64
    }

    /// `F(x_i)` for each sample in input order, ties sharing their average rank.
    pub fn ranks_of(samples: &[f64]) -> Vec<f64> {
        let n = samples.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| samples[i].total_cmp(&samples[j]));
        let mut out = vec![0.0; n];
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && samples[order[end]] == samples[order[start]] {
                end += 1;
            }
            // ranks start+1..=end share their mean
            let avg = (start + 1 + end) as f64 / 2.0;
            for &idx in &order[start..end] {
                out[idx] = avg / n as f64;
            }
            start = end;
        }
        out
    }
}

/// Distribution function fed into [`cdf_transform`].
pub enum SourceCdf<'a> {
    Exact(&'a dyn Fn(f64) -> f64),
    /// Empirical CDF of the very points being transformed (rank transform).
    EmpiricalOfSample,
    Empirical(&'a EmpiricalCdf),
}

/// Push arbitrary-law points onto the Jacobi weight law of `params` on `target`.
///
/// Each point becomes `tau = Q(F(X))` with `Q` the quantile of the law whose
/// density on `[0, 1]` is proportional to `(1 - u)^alpha u^beta`, i.e. the law
/// carried by `w(2u - 1)`; on `[-1, 1]` the image is `2 tau - 1`. When
/// `alpha = beta` this is `I^{-1}(alpha + 1, beta + 1)`.
pub fn cdf_transform(
    samples: &SampleSet,
    cdf: SourceCdf<'_>,
    params: &JacobiParams,
    target: Domain,
) -> Result<SampleSet> {
    let probs: Vec<f64> = match cdf {
        SourceCdf::Exact(f) => samples.points.iter().map(|&x| f(x)).collect(),
        SourceCdf::Empirical(ecdf) => samples.points.iter().map(|&x| ecdf.eval(x)).collect(),
        SourceCdf::EmpiricalOfSample => EmpiricalCdf::ranks_of(&samples.points),
    };
    validate_cdf_values(&samples.points, &probs)?;
    let swapped = params.swapped();
    let points = probs
        .iter()
        .map(|&p| {
            let tau = inverse_beta_cdf(&swapped, p)?;
            Ok(target.from_symmetric(2.0 * tau - 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        points,
        domain: Some(target),
        law: LawTag::Transformed {
            source: Box::new(samples.law.clone()),
            empirical: !matches!(cdf, SourceCdf::Exact(_)),
            alpha: params.alpha(),
            beta: params.beta(),
        },
        seed: samples.seed,
    })
}

fn validate_cdf_values(points: &[f64], probs: &[f64]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("CDF value {p} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].total_cmp(&points[j]));
    for w in order.windows(2) {
        if points[w[1]] > points[w[0]] && probs[w[1]] < probs[w[0]] {
            return Err(Error::InvalidArgument(format!(
                "CDF is not monotone between {} and {}",
                points[w[0]], points[w[1]]
            )));
        }
    }
    Ok(())
}

/// Kolmogorov distance `sup |F_n - F|` between a sample's empirical CDF and `cdf`.
pub fn kolmogorov_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    UniformCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub family: NoiseFamily,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            family: NoiseFamily::Gaussian,
            seed,
        }
    }
}

/// I.i.d. centered noise with standard deviation `sigma`.
pub fn make_noise(spec: &NoiseSpec, n: usize) -> Result<Vec<f64>> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be finite and >= 0, got {}", spec.sigma)));
    }
    if spec.sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = StreamRng::seed_from_u64(spec.seed);
    Ok(match spec.family {
        NoiseFamily::Gaussian => {
            let normal = Normal::new(0.0, spec.sigma).expect("finite sigma");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        }
        NoiseFamily::UniformCentered => {
            let half = spec.sigma * 3f64.sqrt();
            (0..n).map(|_| rng.random_range(-half..=half)).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn derived_seeds_differ_by_label_and_master() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(7, "trial/3"), derive_seed(7, "trial/3"));
    }

    #[test]
    fn beta_sampling_is_deterministic_and_in_domain() {
        let p = JacobiParams::new(0.5, -0.5).unwrap();
        let a = sample_beta_on_i(&p, 1000, 11).unwrap();
        let b = sample_beta_on_i(&p, 1000, 11).unwrap();
        assert_eq!(a.points, b.points);
        assert!(a.points.iter().all(|x| (-1.0..=1.0).contains(x)));
        let u = sample_beta(&p, 1000, Domain::Unit, 11).unwrap();
        assert!(u.points.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(sample_beta_on_i(&p, 0, 1).is_err());
    }

    #[test]
    fn uniform_law_moments() {
        let n = 20_000;
        let s = sample_beta_on_i(&JacobiParams::legendre(), n, 3).unwrap();
        let (mean, _) = mean_var(&s.points);
        assert!(mean.abs() < 3.0 / (3.0 * n as f64).sqrt());
    }

    #[test]
    fn arcsine_law_moments() {
        let n = 100_000;
        let s = sample_beta_on_i(&JacobiParams::chebyshev(), n, 5).unwrap();
        let (mean, var) = mean_var(&s.points);
        assert!(mean.abs() < 4.0 * var.sqrt() / (n as f64).sqrt());
        // Var of the arcsine law on [-1, 1] is 1/2; sd of the sample variance ~ sqrt(1/8 / n)
        assert!((var - 0.5).abs() < 4.0 * (0.125f64 / n as f64).sqrt());
    }

    #[test]
    fn asymmetric_law_mean() {
        let n = 100_000;
        let p = JacobiParams::new(0.5, -0.5).unwrap();
        let s = sample_beta_on_i(&p, n, 9).unwrap();
        let (mean, var) = mean_var(&s.points);
        let expected = (p.beta() - p.alpha()) / (p.alpha() + p.beta() + 2.0);
        assert_abs_diff_eq!(expected, -0.5, epsilon = 1e-15);
        assert!((mean - expected).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn inverse_beta_cdf_examples() {
        let cheb = JacobiParams::chebyshev();
        assert_abs_diff_eq!(inverse_beta_cdf(&cheb, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        let expected = (1.0 + (-std::f64::consts::FRAC_PI_4).sin()) / 2.0;
        assert_abs_diff_eq!(inverse_beta_cdf(&cheb, 0.25).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.1464466, epsilon = 1e-7);
        assert_abs_diff_eq!(inverse_beta_cdf(&JacobiParams::legendre(), 0.37).unwrap(), 0.37, epsilon = 1e-12);
        assert!(inverse_beta_cdf(&cheb, 1.2).is_err());
        assert!(inverse_beta_cdf(&cheb, -0.1).is_err());
    }

    #[test]
    fn inverse_is_right_inverse_on_grid() {
        for (a, b) in [(0.5, 0.5), (1.0, 1.0), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)] {
            for i in 1..100 {
                let t = i as f64 / 100.0;
                let x = inverse_regularized_beta(a, b, t).unwrap();
                assert!((regularized_beta(a, b, x) - t).abs() < 1e-10, "a={a} b={b} t={t}");
            }
        }
    }

    #[test]
    fn identity_cdf_transform_on_uniform() {
        let pts: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
        let set = SampleSet::from_points(pts.clone(), Domain::Unit, "grid").unwrap();
        let id = |x: f64| x;
        let out = cdf_transform(&set, SourceCdf::Exact(&id), &JacobiParams::legendre(), Domain::Unit).unwrap();
        for (a, b) in out.points.iter().zip(&pts) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_monotone_cdf_is_rejected() {
        let set = SampleSet::from_points(vec![0.1, 0.2, 0.3], Domain::Unit, "grid").unwrap();
        let bad = |x: f64| 1.0 - x;
        assert!(cdf_transform(&set, SourceCdf::Exact(&bad), &JacobiParams::legendre(), Domain::Unit).is_err());
        let out_of_range = |x: f64| 2.0 * x;
        let set = SampleSet::from_points(vec![0.9], Domain::Unit, "grid").unwrap();
        assert!(cdf_transform(&set, SourceCdf::Exact(&out_of_range), &JacobiParams::legendre(), Domain::Unit).is_err());
    }

    #[test]
    fn normal_through_exact_cdf_matches_arcsine_moments() {
        let n = 100_000;
        let normal = sample_standard_normal(n, 17).unwrap();
        let cdf = standard_normal_cdf;
        let out = cdf_transform(&normal, SourceCdf::Exact(&cdf), &JacobiParams::chebyshev(), Domain::Unit).unwrap();
        let (mean, var) = mean_var(&out.points);
        // arcsine law on [0, 1]: mean 1/2, variance 1/8, fourth central moment 3/128
        let se_mean = (0.125f64 / n as f64).sqrt();
        let se_var = ((3.0 / 128.0 - 0.125f64 * 0.125) / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se_mean);
        assert!((var - 0.125).abs() < 4.0 * se_var);
    }

    #[test]
    fn empirical_rank_transform_is_close_to_arcsine() {
        let n = 20_000;
        let normal = sample_standard_normal(n, 23).unwrap();
        let out = cdf_transform(&normal, SourceCdf::EmpiricalOfSample, &JacobiParams::chebyshev(), Domain::Unit).unwrap();
        let arcsine_cdf = |x: f64| regularized_beta(0.5, 0.5, x);
        let d = kolmogorov_distance(&out.points, arcsine_cdf);
        assert!(d < 2.0 / (n as f64).sqrt(), "distance {d}");
    }

    #[test]
    fn empirical_cdf_shape() {
        let ecdf = EmpiricalCdf::new(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(ecdf.eval(0.5), 0.0);
        assert_eq!(ecdf.eval(1.0), 0.25);
        assert_eq!(ecdf.eval(2.0), 0.75);
        assert_eq!(ecdf.eval(3.0), 1.0);
        let lin = EmpiricalCdf::new(&[0.0, 1.0, 2.0]).unwrap().interpolated();
        assert_abs_diff_eq!(lin.eval(0.5), 0.5, epsilon = 1e-15);
        assert_eq!(EmpiricalCdf::ranks_of(&[5.0, 1.0, 5.0, 2.0]), vec![0.875, 0.25, 0.875, 0.5]);
        assert!(EmpiricalCdf::new(&[]).is_err());
    }

    #[test]
    fn noise_families() {
        assert_eq!(make_noise(&NoiseSpec::gaussian(0.0, 1), 5).unwrap(), vec![0.0; 5]);
        let g = make_noise(&NoiseSpec::gaussian(0.1, 2), 100_000).unwrap();
        let (_, var) = mean_var(&g);
        assert!((0.009..=0.011).contains(&var));
        let u = make_noise(
            &NoiseSpec {
                sigma: 1.0,
                family: NoiseFamily::UniformCentered,
                seed: 3,
            },
            100_000,
        )
        .unwrap();
        assert!(u.iter().all(|e| e.abs() <= 3f64.sqrt()));
        let (mean, var) = mean_var(&u);
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02);
    }
}
