use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument was NaN or infinite where a finite value is required.
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    /// Generic precondition violation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested kernel/bandwidth parametrization pair is not defined.
    #[error("invalid kernel/bandwidth combination: {0}")]
    InvalidCombination(String),

    /// An analytic h-derivative was requested for a kernel that has none.
    #[error("kernel is not differentiable in the bandwidth: {0}")]
    NotDifferentiable(String),

    /// Malformed configuration (CLI config file, fold setup, grid bounds, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A vector or matrix had the wrong dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Gradient descent produced a non-finite objective or gradient.
    /// The trace of completed iterations is preserved for diagnosis.
    #[error("gradient descent diverged after {} recorded step(s)", trace.len())]
    GdDiverged { trace: Vec<crate::bandwidth::GdStep> },

    /// A named CSV column was not found in the header.
    #[error("missing column {0:?}")]
    MissingColumn(String),

    /// A CSV cell could not be parsed as a number (1-based row, named column).
    #[error("unparseable cell at row {row}, column {column:?}: {value:?}")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },

    /// Too many replications of an experiment failed.
    #[error("{failed} of {total} replications failed, above the 10% abort threshold")]
    FailureThreshold { failed: usize, total: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
