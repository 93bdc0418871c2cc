use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed header in {}: {reason}", .path.display())]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("expected a mono wav file, found {0} channels")]
    NotMono(u16),

    #[error("line {line}: cannot parse {content:?}")]
    UnparsableLine { line: usize, content: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("point outside the supported span: {0}")]
    OutOfSpan(String),

    #[error("degenerate zero: |det J| = {det:e} is below the floor {floor:e}")]
    DegenerateZero { det: f64, floor: f64 },

    #[error(
        "newton iteration did not converge after {iterations} steps \
         (best residual {residual:e} at x = {x_s} s, omega = {omega_hz} Hz)"
    )]
    NoConvergence {
        x_s: f64,
        omega_hz: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),
}

/// Failure classes, used for process exit codes and C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) | Error::Unsupported(_) => ErrorClass::Usage,
            Error::MissingFile(_)
            | Error::MalformedHeader { .. }
            | Error::NotMono(_)
            | Error::UnparsableLine { .. }
            | Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
