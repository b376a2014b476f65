use thiserror::Error;

/// Errors produced by series handling, generation and detection.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("timestamp {stamp} outside [1, {length}]")]
    OutOfRange { stamp: i64, length: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("too few events: found {found}, detection needs at least {required}")]
    TooFewEvents { found: usize, required: usize },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
