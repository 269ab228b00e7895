//! Random pseudo-inverse regression estimators.
//!
//! Two estimators share one idea: fit coefficients of an orthonormal expansion by
//! least squares against a random design, and certify stability through the
//! spectrum of the design's Gram matrix.
//!
//! * [`npreg`]: nonparametric regression over orthonormal Jacobi polynomials
//!   evaluated at Beta-distributed sample points, with truncation and RANSAC.
//! * [`lfr`]: linear functional regression solved block-by-block over a dyadic
//!   partition of the coefficient indices.
//!
//! Supporting modules: [`jacobi`] (basis, bounds, Gauss–Jacobi quadrature),
//! [`randsample`] (seeded sampling and CDF transforms), [`specdiag`] (design
//! matrices, spectra and theoretical bound calculators), [`krr`] (sinc-kernel
//! ridge regression baseline) and [`bench`] (experiment harness behind the CLI).

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod jacobi;
pub mod krr;
pub mod lfr;
pub mod npreg;
pub mod randsample;
pub mod specdiag;

pub use error::{Error, Result};
pub use jacobi::{Domain, JacobiBasis, JacobiParams, QuadratureRule};
pub use npreg::NpregModel;
pub use specdiag::{DesignMatrix, SpectralReport, TheoryBounds};
