use thiserror::Error;

use crate::specdiag::SpectralReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single unparseable row of an input CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degree {k} out of range 0..={max}")]
    Degree { k: usize, max: usize },

    #[error("point {x} lies outside the basis domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("degree {0} not covered by the uniform bound (requires k >= 2)")]
    UnsupportedDegree(usize),

    #[error("underdetermined system: {rows} samples for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("near-singular Gram matrix (lambda_min = {:e}, lambda_max = {:e})", .0.lambda_min, .0.lambda_max)]
    NearSingular(Box<SpectralReport>),

    #[error("dyadic block {block} has a near-singular Gram matrix (lambda_min = {:e})", .report.lambda_min)]
    BlockFailure {
        block: usize,
        report: Box<SpectralReport>,
    },

    #[error("robust fit failed: all {0} subsample fits were near-singular")]
    RobustFitFailure(usize),

    #[error("kernel system is singular; a positive regularization parameter is required")]
    RegularizationRequired,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown location {0:?}")]
    UnknownLocation(String),

    #[error("insufficient data: series has {available} points, {required} required")]
    InsufficientData { available: usize, required: usize },

    #[error("dates not strictly increasing at line {line}")]
    NonMonotoneDates { line: u64 },

    #[error("{} unparseable row(s); first: {}", .0.len(), .0[0])]
    Rows(Vec<RowError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerical singularity rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NearSingular(_)
                | Error::BlockFailure { .. }
                | Error::RobustFitFailure(_)
                | Error::RegularizationRequired
        )
    }

    /// Short machine-readable tag, used on the CLI diagnostic line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Degree { .. } => "degree",
            Error::Domain { .. } => "domain",
            Error::UnsupportedDegree(_) => "unsupported_degree",
            Error::Underdetermined { .. } => "underdetermined",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::NearSingular(_) => "near_singular",
            Error::BlockFailure { .. } => "block_failure",
            Error::RobustFitFailure(_) => "robust_fit_failure",
            Error::RegularizationRequired => "regularization_required",
            Error::Precondition(_) => "precondition",
            Error::Config(_) => "config",
            Error::UnknownLocation(_) => "unknown_location",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::NonMonotoneDates { .. } => "non_monotone_dates",
            Error::Rows(_) => "row_errors",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
