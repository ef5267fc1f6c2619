//! Crate-wide error type.
//!
//! Every fallible operation in the crate reports one of these variants;
//! the CLI maps them onto its exit-code contract and the FFI layer onto
//! C error codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz: max eigenvalue real part {max_re:.6e}")]
    NotHurwitz { max_re: f64 },

    #[error("{context}: matrix is not symmetric")]
    NotSymmetric { context: &'static str },

    #[error("{context}: matrix is not positive definite (min eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { context: &'static str, min_eig: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("derivative evaluation produced a non-finite value at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),

    #[error("training batch is empty")]
    EmptyBatch,

    #[error("feature vector has near-zero norm ({norm:.3e}); kernel score undefined")]
    ZeroFeature { norm: f64 },

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("buffer holds {available} entries, need {requested} for a mini-batch")]
    InsufficientData { available: usize, requested: usize },

    #[error("state left the inflated operating domain at t = {t:.4} (|x_{index}| = {value:.4e} > {limit:.4e})")]
    DomainExit {
        t: f64,
        index: usize,
        value: f64,
        limit: f64,
    },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("scenario is unstructured (no known ideal weights); monitor undefined")]
    UnstructuredScenario,

    #[error("confidence delta must lie in (0, 2], got {0}")]
    InvalidConfidence(f64),

    #[error("tolerance epsilon must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("network file is malformed: {0}")]
    MalformedNetworkFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
