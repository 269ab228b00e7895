//! Python bindings for `rpinv`.
//!
//! Exposes the Jacobi basis, seeded sampling, spectral diagnostics, the
//! least-squares and kernel ridge estimators, the dyadic LFR estimator and the
//! experiment harness. Heavy calls release the GIL.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use rpinv::bench::{self, ExperimentConfig, OutputFormat};
use rpinv::krr;
use rpinv::lfr::{self, LfrVariant};
use rpinv::npreg;
use rpinv::randsample;
use rpinv::specdiag;
use rpinv::{Domain, Error};

create_exception!(pyrpinv, RpinvError, PyException, "Invalid input or configuration.");
create_exception!(pyrpinv, NumericalError, RpinvError, "A Gram or kernel matrix was numerically singular.");

fn to_py(err: Error) -> PyErr {
    if err.is_numerical() {
        NumericalError::new_err(err.to_string())
    } else {
        RpinvError::new_err(err.to_string())
    }
}

fn parse_domain(name: &str) -> PyResult<Domain> {
    match name {
        "symmetric" => Ok(Domain::Symmetric),
        "unit" => Ok(Domain::Unit),
        other => Err(RpinvError::new_err(format!("unknown domain {other:?}; expected 'symmetric' or 'unit'"))),
    }
}

fn params(alpha: f64, beta: Option<f64>) -> PyResult<rpinv::JacobiParams> {
    rpinv::JacobiParams::new(alpha, beta.unwrap_or(alpha)).map_err(to_py)
}

/// Orthonormal Jacobi polynomials of degree `0..=degree`.
#[pyclass(name = "JacobiBasis", module = "pyrpinv", frozen)]
struct PyJacobiBasis {
    inner: rpinv::JacobiBasis,
}

#[pymethods]
impl PyJacobiBasis {
    #[new]
    #[pyo3(signature = (alpha, degree, beta=None, domain="symmetric"))]
    fn new(alpha: f64, degree: usize, beta: Option<f64>, domain: &str) -> PyResult<Self> {
        Ok(Self {
            inner: rpinv::JacobiBasis::new(params(alpha, beta)?, degree, parse_domain(domain)?),
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.params().alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.params().beta()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn eval(&self, k: usize, x: f64) -> PyResult<f64> {
        self.inner.eval(k, x).map_err(to_py)
    }

    fn eval_row(&self, x: f64) -> PyResult<Vec<f64>> {
        self.inner.eval_row(x).map_err(to_py)
    }

    /// Gauss rule of the basis weight as `(nodes, weights)`.
    fn quadrature(&self, order: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let rule = self.inner.quadrature(order).map_err(to_py)?;
        Ok((rule.nodes().to_vec(), rule.weights().to_vec()))
    }

    fn __repr__(&self) -> String {
        format!("JacobiBasis(alpha={}, beta={}, degree={})", self.alpha(), self.beta(), self.degree())
    }
}

/// Spectrum of a symmetric matrix.
#[pyclass(name = "SpectralReport", module = "pyrpinv", frozen, get_all)]
struct PySpectralReport {
    eigenvalues: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
    kappa2: f64,
    near_singular: bool,
}

impl From<&specdiag::SpectralReport> for PySpectralReport {
    fn from(r: &specdiag::SpectralReport) -> Self {
        Self {
            eigenvalues: r.eigenvalues.clone(),
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            kappa2: r.kappa2,
            near_singular: r.near_singular,
        }
    }
}

#[pymethods]
impl PySpectralReport {
    fn __repr__(&self) -> String {
        format!("SpectralReport(lambda_min={:e}, lambda_max={:e}, kappa2={})", self.lambda_min, self.lambda_max, self.kappa2)
    }
}

/// Least-squares fit over a Jacobi basis.
#[pyclass(name = "NpregModel", module = "pyrpinv", frozen)]
struct PyNpregModel {
    inner: npreg::NpregModel,
}

#[pymethods]
impl PyNpregModel {
    #[staticmethod]
    #[pyo3(signature = (basis, x, y))]
    fn fit(py: Python<'_>, basis: &PyJacobiBasis, x: Vec<f64>, y: Vec<f64>) -> PyResult<Self> {
        let b = basis.inner.clone();
        let inner = py.detach(|| npreg::fit_points(&b, &x, &y)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: npreg::NpregModel::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn report(&self) -> Option<PySpectralReport> {
        self.inner.fit_report().map(PySpectralReport::from)
    }

    /// Copy with predictions clipped to `[-level, level]`; `None` removes the clipping.
    #[pyo3(signature = (level=None))]
    fn with_truncation(&self, level: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_truncation(level).map_err(to_py)?,
        })
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict_many(&x).map_err(to_py)
    }
}

/// Sinc-kernel ridge regression.
#[pyclass(name = "KrrModel", module = "pyrpinv", frozen)]
struct PyKrrModel {
    inner: krr::KrrModel,
}

#[pymethods]
impl PyKrrModel {
    #[staticmethod]
    fn fit(py: Python<'_>, x: Vec<f64>, y: Vec<f64>, bandwidth: f64, lam: f64) -> PyResult<Self> {
        let inner = py.detach(|| krr::krr_fit(&x, &y, bandwidth, lam)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// K-fold cross-validation over `grid`, then a refit at the chosen `lambda`.
    #[staticmethod]
    #[pyo3(signature = (x, y, bandwidth, grid=None, folds=5, seed=0))]
    fn fit_cv(py: Python<'_>, x: Vec<f64>, y: Vec<f64>, bandwidth: f64, grid: Option<Vec<f64>>, folds: usize, seed: u64) -> PyResult<Self> {
        let grid = grid.unwrap_or_else(krr::default_lambda_grid);
        let inner = py
            .detach(|| {
                let cv = krr::cross_validate(&x, &y, bandwidth, &grid, folds, seed)?;
                krr::krr_fit(&x, &y, bandwidth, cv.best_lambda)
            })
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.inner.bandwidth
    }

    fn predict(&self, x: Vec<f64>) -> Vec<f64> {
        x.iter().map(|&v| self.inner.predict(v)).collect()
    }
}

/// Dyadic LFR fit of a simulated problem.
#[pyclass(name = "LfrFit", module = "pyrpinv", frozen, get_all)]
struct PyLfrFit {
    coeffs: Vec<f64>,
    true_coeffs: Vec<f64>,
    cumulative_kappa: f64,
    block_kappas: Vec<f64>,
    e0: f64,
    e2: f64,
}

fn parse_variant(name: &str) -> PyResult<LfrVariant> {
    match name {
        "example3" => Ok(LfrVariant::Example3),
        "table2" => Ok(LfrVariant::Table2),
        other => Err(RpinvError::new_err(format!("unknown variant {other:?}; expected 'example3' or 'table2'"))),
    }
}

/// Simulate an LFR problem and fit it block by block.
#[pyfunction]
#[pyo3(signature = (n, degree, s, sigma, variant="example3", seed=0))]
fn lfr_simulate_fit(py: Python<'_>, n: usize, degree: usize, s: f64, sigma: f64, variant: &str, seed: u64) -> PyResult<PyLfrFit> {
    let variant = parse_variant(variant)?;
    py.detach(|| {
        let problem = lfr::simulate_problem(n, degree, s, sigma, variant, seed)?;
        let model = lfr::lfr_fit(&problem)?;
        let errors = lfr::model_errors(&model, &problem)?;
        Ok(PyLfrFit {
            coeffs: model.coeffs(),
            true_coeffs: problem.true_coeffs.clone(),
            cumulative_kappa: model.cumulative_kappa,
            block_kappas: model.block_reports.iter().map(|r| r.kappa2).collect(),
            e0: errors.e0,
            e2: errors.e2,
        })
    })
    .map_err(to_py)
}

/// `n` points of the normalized Jacobi weight law.
#[pyfunction]
#[pyo3(signature = (alpha, n, seed, beta=None, domain="symmetric"))]
fn sample_beta(alpha: f64, n: usize, seed: u64, beta: Option<f64>, domain: &str) -> PyResult<Vec<f64>> {
    Ok(randsample::sample_beta(&params(alpha, beta)?, n, parse_domain(domain)?, seed).map_err(to_py)?.points)
}

#[pyfunction]
#[pyo3(signature = (alpha, t, beta=None))]
fn inverse_beta_cdf(alpha: f64, t: f64, beta: Option<f64>) -> PyResult<f64> {
    randsample::inverse_beta_cdf(&params(alpha, beta)?, t).map_err(to_py)
}

/// Spectrum of a symmetric matrix given as a list of rows.
#[pyfunction]
fn spectral_report(rows: Vec<Vec<f64>>) -> PyResult<PySpectralReport> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(RpinvError::new_err("matrix must be square"));
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(PySpectralReport::from(&specdiag::spectral_report(&m).map_err(to_py)?))
}

/// Spectral report of one random Gram matrix, as the `diagnose` subcommand prints it.
#[pyfunction]
#[pyo3(signature = (alpha, degree, n, seed, beta=None))]
fn diagnose(py: Python<'_>, alpha: f64, degree: usize, n: usize, seed: u64, beta: Option<f64>) -> PyResult<String> {
    let d = py.detach(|| bench::cli::diagnose(alpha, beta.unwrap_or(alpha), degree, n, seed)).map_err(to_py)?;
    serde_json::to_string(&d).map_err(|e| RpinvError::new_err(e.to_string()))
}

/// Run an experiment described by a JSON config and return its output text.
#[pyfunction]
#[pyo3(signature = (config_json, format="json"))]
fn run_experiment(py: Python<'_>, config_json: &str, format: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let format = match format {
        "json" => OutputFormat::Json,
        "csv" => OutputFormat::Csv,
        other => return Err(RpinvError::new_err(format!("unknown format {other:?}"))),
    };
    let out = py
        .detach(|| {
            let result = bench::run(&config)?;
            let mut buf = Vec::new();
            result.write(&mut buf, format)?;
            Ok(buf)
        })
        .map_err(to_py)?;
    String::from_utf8(out).map_err(|e| RpinvError::new_err(e.to_string()))
}

/// Run the command-line interface with `args` (without the program name); returns the exit code.
#[pyfunction]
fn cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(|| {
        let argv = std::iter::once("rpinv".to_string()).chain(args);
        bench::cli::run_cli(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
    })
}

#[pymodule]
fn pyrpinv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RpinvError", m.py().get_type::<RpinvError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyJacobiBasis>()?;
    m.add_class::<PySpectralReport>()?;
    m.add_class::<PyNpregModel>()?;
    m.add_class::<PyKrrModel>()?;
    m.add_class::<PyLfrFit>()?;
    m.add_function(wrap_pyfunction!(sample_beta, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_report, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(lfr_simulate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
