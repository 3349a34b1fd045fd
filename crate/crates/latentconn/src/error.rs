use thiserror::Error;

/// Errors surfaced by every module in this crate.
///
/// The CLI maps these onto process exit codes: `Numeric` exits with 3,
/// everything else with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Shape(String),

    /// A time series column (or a statistics sample) has zero variance.
    #[error("{0}")]
    DegenerateSeries(String),

    #[error("{0}")]
    Validation(String),

    /// Non-finite values where finite arithmetic was required.
    #[error("{0}")]
    Numeric(String),

    #[error("{0}")]
    Parse(String),

    /// API misuse, e.g. querying cohort statistics before training.
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    InsufficientData(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI contract (2 = validation, 3 = numeric).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }

    /// Short machine-parsable category used on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::DegenerateSeries(_) => "degenerate-series",
            Error::Validation(_) => "validation",
            Error::Numeric(_) => "numeric",
            Error::Parse(_) => "parse",
            Error::Usage(_) => "usage",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
