//! Kernel ridge regression with the sinc kernel, used as a baseline.
//!
//! The dual coefficients solve `(K / n + lambda I) c = Y / n` and the estimate is
//! `f(x) = Σ c_k K(x, X_k)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::randsample::StreamRng;

/// `sin(c (x - y)) / (pi (x - y))`, with the series `c/pi (1 - (c d)^2 / 6)` near the diagonal.
pub fn sinc_kernel(c: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    if d.abs() < 1e-12 {
        let cd = c * d;
        c / std::f64::consts::PI * (1.0 - cd * cd / 6.0)
    } else {
        (c * d).sin() / (std::f64::consts::PI * d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    pub dual_coeffs: Vec<f64>,
    pub anchors: Vec<f64>,
    pub bandwidth: f64,
    pub lambda: f64,
}

impl KrrModel {
    pub fn predict(&self, x: f64) -> f64 {
        self.anchors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(&a, &c)| c * sinc_kernel(self.bandwidth, x, a))
            .sum()
    }
}

pub fn kernel_matrix(bandwidth: f64, points: &[f64]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| sinc_kernel(bandwidth, points[i], points[j]))
}

/// Solve the regularized system for the dual coefficients by Cholesky.
pub fn krr_fit(points: &[f64], y: &[f64], bandwidth: f64, lambda: f64) -> Result<KrrModel> {
    let n = points.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("kernel ridge regression needs data".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let nf = n as f64;
    let mut g = kernel_matrix(bandwidth, points) / nf;
    for i in 0..n {
        g[(i, i)] += lambda;
    }
    let chol = Cholesky::new(g).ok_or(Error::RegularizationRequired)?;
    if lambda == 0.0 {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if lo * lo <= 1e-12 * hi * hi {
            return Err(Error::RegularizationRequired);
        }
    }
    let rhs = DVector::from_iterator(n, y.iter().map(|v| v / nf));
    let c = chol.solve(&rhs);
    Ok(KrrModel {
        dual_coeffs: c.iter().copied().collect(),
        anchors: points.to_vec(),
        bandwidth,
        lambda,
    })
}

/// Default regularization grid: 12 log-spaced values in `[1e-9, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..12).map(|i| 10f64.powf(-9.0 + 9.0 * i as f64 / 11.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    /// `(lambda, mean held-out squared error)`; infinite where a fold could not be fitted.
    pub scores: Vec<(f64, f64)>,
}

/// K-fold cross-validation over `grid`; ties go to the larger `lambda`.
pub fn cross_validate(points: &[f64], y: &[f64], bandwidth: f64, grid: &[f64], folds: usize, seed: u64) -> Result<CvResult> {
    let n = points.len();
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!("folds must lie in [2, {n}], got {folds}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut StreamRng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let scores = grid
        .par_iter()
        .map(|&lambda| {
            let mut sq = 0.0;
            for fold in 0..folds {
                let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for i in 0..n {
                    if fold_of[i] == fold {
                        vx.push(points[i]);
                        vy.push(y[i]);
                    } else {
                        tx.push(points[i]);
                        ty.push(y[i]);
                    }
                }
                match krr_fit(&tx, &ty, bandwidth, lambda) {
                    Ok(model) => {
                        sq += vx.iter().zip(&vy).map(|(&x, &v)| (model.predict(x) - v).powi(2)).sum::<f64>();
                    }
                    Err(Error::RegularizationRequired) => return Ok((lambda, f64::INFINITY)),
                    Err(e) => return Err(e),
                }
            }
            Ok((lambda, sq / n as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &(lambda, score) in &scores[1..] {
        if score < best.1 || (score == best.1 && lambda > best.0) {
            best = (lambda, score);
        }
    }
    Ok(CvResult {
        best_lambda: best.0,
        scores,
    })
}
