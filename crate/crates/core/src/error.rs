//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument to an operation (bad dimensions, out-of-range knobs).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Input outside a function's mathematical domain (e.g. inverse at a rail).
    #[error("domain error: {0}")]
    Domain(String),

    /// Integration produced a non-finite value.
    #[error("numeric overflow at step {step}: {detail}")]
    NumericOverflow { step: usize, detail: String },

    /// Dataset violates a consistency requirement.
    #[error("data error: {0}")]
    Data(String),

    /// A metric cannot be computed from the given table.
    #[error("metrics error: {0}")]
    Metrics(String),

    /// Reference-voltage search found no acceptable operating point.
    #[error("calibration failure: {0}")]
    CalibrationFailure(String),

    /// Configuration file problems (parse or validation).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numeric, 4 calibration, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::NumericOverflow { .. } => 3,
            Error::CalibrationFailure(_) => 4,
            _ => 1,
        }
    }
}
