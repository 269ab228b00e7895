use crate::error::{Error, Result};

use super::{Domain, JacobiBasis, JacobiParams};

/// Gauss rule for a Jacobi weight. Nodes are ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    domain: Domain,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `Σ w_j f(x_j)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Pull the rule back to `[0, 1]` for the weight `4 w(2x - 1)`.
    pub(crate) fn to_unit_interval(&self) -> Self {
        debug_assert_eq!(self.domain, Domain::Symmetric);
        Self {
            nodes: self.nodes.iter().map(|t| (t + 1.0) / 2.0).collect(),
            weights: self.weights.iter().map(|w| 2.0 * w).collect(),
            order: self.order,
            domain: Domain::Unit,
        }
    }
}

/// Golub–Welsch rule with `order` nodes for the weight `(1-x)^alpha (1+x)^beta`.
///
/// Nodes are the eigenvalues of the symmetric Jacobi matrix of the monic
/// recurrence; weights are `gamma_ab` times the squared first components of the
/// normalized eigenvectors.
pub fn gauss_jacobi_rule(params: &JacobiParams, order: usize) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
    }
    let (a, b) = (params.alpha(), params.beta());
    let mut diag = Vec::with_capacity(order);
    for k in 0..order {
        let kf = k as f64;
        let d = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            let s = 2.0 * kf + a + b;
            (b * b - a * a) / (s * (s + 2.0))
        };
        diag.push(d);
    }
    // off[k] couples rows k-1 and k
    let mut off = vec![0.0; order];
    for (k, o) in off.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        *o = if k == 1 {
            (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))).sqrt()
        } else {
            (4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
        };
    }

    let (nodes, first) = tridiagonal_eigen_first_components(diag, off)?;
    let mass = params.gamma_ab();
    let mut pairs: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(first)
        .map(|(x, v)| (x, mass * v * v))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadratureRule {
        nodes,
        weights,
        order,
        domain: Domain::Symmetric,
    })
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix, tracking
/// only the first row of the eigenvector matrix.
///
/// `off[i]` is the element at `(i-1, i)`; `off[0]` is ignored.
fn tridiagonal_eigen_first_components(
    mut d: Vec<f64>,
    off: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[1..]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::InvalidArgument(
                    "tridiagonal eigensolver failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// Weighted norm `sqrt(Σ w_j f(x_j)^2)` of `f` under `rule`.
pub fn omega_norm<F: Fn(f64) -> f64>(basis: &JacobiBasis, f: F, rule: &QuadratureRule) -> f64 {
    debug_assert_eq!(basis.domain(), rule.domain(), "rule and basis domains differ");
    rule.integrate(|x| {
        let v = f(x);
        v * v
    })
    .max(0.0)
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::JacobiBasis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_gauss_legendre() {
        let rule = gauss_jacobi_rule(&JacobiParams::legendre(), 2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -r, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], r, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_node_rule_is_weight_mean() {
        let p = JacobiParams::new(0.5, -0.5).unwrap();
        let rule = gauss_jacobi_rule(&p, 1).unwrap();
        // mean of the Beta-type law on [-1, 1]
        assert_abs_diff_eq!(rule.nodes()[0], (p.beta() - p.alpha()) / (p.alpha() + p.beta() + 2.0), epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[0], p.gamma_ab(), epsilon = 1e-14);
    }

    #[test]
    fn weights_sum_to_total_mass() {
        for order in [1, 3, 10, 57] {
            let rule = gauss_jacobi_rule(&JacobiParams::legendre(), order).unwrap();
            assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-12);
            for a in [-0.5, 0.0, 0.5] {
                for b in [-0.5, 0.0, 0.5] {
                    let p = JacobiParams::new(a, b).unwrap();
                    let rule = gauss_jacobi_rule(&p, order).unwrap();
                    let total: f64 = rule.weights().iter().sum();
                    assert!((total - p.gamma_ab()).abs() < 1e-12, "a={a} b={b} order={order}");
                    assert!(rule.weights().iter().all(|&w| w > 0.0));
                    assert!(rule.nodes().iter().all(|&x| x > -1.0 && x < 1.0));
                }
            }
        }
    }

    /// Exact moments of the Jacobi weight `∫ x^m w dx`, expanded from `x = 2u - 1`
    /// with `u ~ Beta(beta+1, alpha+1)`. Also returns the sum of absolute terms,
    /// which bounds the cancellation error of the expansion.
    fn exact_moment(p: &JacobiParams, m: u32) -> (f64, f64) {
        let (a, b) = (p.alpha(), p.beta());
        let (mut total, mut scale) = (0.0, 0.0);
        for j in 0..=m {
            let binom = (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
            let sign = if (m - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            // E[u^j] for u ~ Beta(beta + 1, alpha + 1)
            let eu = (0..j).fold(1.0, |acc, i| acc * (b + 1.0 + i as f64) / (a + b + 2.0 + i as f64));
            let term = binom * 2f64.powi(j as i32) * eu;
            total += sign * term;
            scale += term;
        }
        (total * p.gamma_ab(), scale * p.gamma_ab())
    }

    #[test]
    fn integrates_monomials_exactly() {
        for a in [-0.5, 0.0, 0.5] {
            for b in [-0.5, 0.0, 0.5] {
                let p = JacobiParams::new(a, b).unwrap();
                let order = 6;
                let rule = gauss_jacobi_rule(&p, order).unwrap();
                for m in 0..(2 * order as u32) {
                    let q = rule.integrate(|x| x.powi(m as i32));
                    let (exact, scale) = exact_moment(&p, m);
                    assert!((q - exact).abs() < 1e-12 * scale.max(1.0), "a={a} b={b} m={m}");
                }
            }
        }
    }

    #[test]
    fn chebyshev_degree_five_unit_norm() {
        let basis = JacobiBasis::symmetric(JacobiParams::chebyshev(), 5);
        let rule = gauss_jacobi_rule(basis.params(), 30).unwrap();
        let sq = rule.integrate(|x| basis.eval(5, x).unwrap().powi(2));
        assert_abs_diff_eq!(sq, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn omega_norm_examples() {
        let basis = JacobiBasis::symmetric(JacobiParams::legendre(), 3);
        let rule = basis.quadrature(4).unwrap();
        assert_eq!(omega_norm(&basis, |_| 0.0, &rule), 0.0);
        assert_abs_diff_eq!(omega_norm(&basis, |x| basis.eval(3, x).unwrap(), &rule), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(omega_norm(&basis, |_| 1.0, &rule), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_zero_order() {
        assert!(gauss_jacobi_rule(&JacobiParams::legendre(), 0).is_err());
    }
}
