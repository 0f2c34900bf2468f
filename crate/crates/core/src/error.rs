use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular covariance{}: {detail}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    SingularCovariance { row: Option<usize>, detail: String },

    #[error("logging policy is degenerate: estimated price variance {0:e}")]
    DegenerateLogging(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach a row index to a singular-covariance error.
    pub fn at_row(self, idx: usize) -> Self {
        match self {
            Error::SingularCovariance { detail, .. } => Error::SingularCovariance {
                row: Some(idx),
                detail,
            },
            other => other,
        }
    }
}
