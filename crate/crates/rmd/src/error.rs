//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Matrix dimensions do not agree with what the operation requires.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A target matrix entry is negative (1-indexed position reported).
    NegativeEntry { row: usize, col: usize, value: f64 },
    /// A matrix entry is NaN or infinite (1-indexed position reported).
    NonFiniteEntry { row: usize, col: usize },
    /// The operation is undefined for an all-zero input.
    ZeroMatrix(&'static str),
    /// The input matrix has numerical rank zero; no basis columns exist.
    RankZero,
    /// A scalar or configuration argument is outside its allowed range.
    InvalidArgument(String),
    /// A structured text file failed to parse.
    Parse { line: usize, msg: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::NegativeEntry { row, col, value } => write!(
                f,
                "negative entry {value} at ({row},{col}); the target matrix must be nonnegative"
            ),
            Error::NonFiniteEntry { row, col } => {
                write!(f, "non-finite entry at ({row},{col})")
            }
            Error::ZeroMatrix(what) => write!(f, "{what} is undefined for an all-zero matrix"),
            Error::RankZero => write!(f, "matrix has numerical rank zero; no range basis exists"),
            Error::InvalidArgument(msg) => write!(f, "{msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
