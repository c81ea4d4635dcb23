use thiserror::Error;

/// Errors raised by the estimation and model-selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    InvalidTrace { trace: f64 },

    #[error("matrix exponential overflows (max eigenvalue {max_eigenvalue})")]
    ExpOverflow { max_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two >= 2")]
    BadDimension(usize),

    #[error("{qubits} qubits exceeds the cap of {cap} for {what}")]
    TooManyQubits {
        qubits: usize,
        cap: usize,
        what: &'static str,
    },

    #[error("parameter vector has length {found}, model expects {expected}")]
    ParamLength { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("outcome {outcome} has model probability {probability:e} (support violation)")]
    SupportViolation { outcome: String, probability: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("cannot compare criterion reports: {0}")]
    IncomparableReports(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
