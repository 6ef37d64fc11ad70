use thiserror::Error;

/// Errors produced by every operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid landmark configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate shape: all landmarks coincide")]
    DegenerateShape,

    #[error("shape mismatch: expected {expected_p}x{expected_k}, found {found_p}x{found_k}")]
    ShapeMismatch {
        expected_p: usize,
        expected_k: usize,
        found_p: usize,
        found_k: usize,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("boundary undefined: {0}")]
    BoundaryUndefined(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) | Error::DegenerateShape | Error::BoundaryUndefined(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
