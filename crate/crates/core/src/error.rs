use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular system in {context} (condition estimate {condition:.3e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("factor {factor} collapsed to a constant (sd {sd:.3e})")]
    FactorCollapsed { factor: usize, sd: f64 },

    #[error("eigendecomposition of the sample covariance did not converge")]
    Eigen,

    #[error("row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{failed} of {total} replications failed (first: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the numerical fit rather than by the caller's input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::FactorCollapsed { .. } | Error::Eigen | Error::TooManyFailures { .. }
        )
    }
}
