use thiserror::Error;

/// Errors produced while validating inputs or fitting models.
#[derive(Debug, Error)]
pub enum FwelnetError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("lambda {0} is not on the fitted path")]
    LambdaNotOnPath(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FwelnetError>;
