use thiserror::Error;

/// Errors produced by the exact and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bias parameter {0} is outside the open interval (0, 1)")]
    InvalidBias(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coordinate index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("{op} is limited to n <= {max}, got n = {n}")]
    DimensionTooLarge { op: &'static str, n: usize, max: usize },

    #[error("word {bits:#x} has bits set above dimension {n}")]
    BitsOutOfRange { bits: u64, n: usize },

    #[error("truth table length {found} does not match 2^{n} = {expected}")]
    TruthTableLength {
        n: usize,
        expected: usize,
        found: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("family {0} has no incremental evaluator")]
    UnsupportedFamily(String),

    #[error("{op} requires an increasing function")]
    NotIncreasing { op: &'static str },

    #[error("spectrum reconstruction at point {point:#x} is {value}, not within 1e-6 of a bit")]
    CorruptSpectrum { point: u64, value: f64 },

    #[error("series truncation not certified: tail bound {tail:e} > tol {tol:e} at k_max = {k_max}")]
    TruncationFailure { k_max: usize, tail: f64, tol: f64 },

    #[error("criterion ratio undefined: total influence is zero")]
    UndefinedRatio,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
