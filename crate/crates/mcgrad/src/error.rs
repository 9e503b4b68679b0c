//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length/shape.
    DimMismatch { expected: usize, got: usize },
    /// A parameter violated its domain (e.g. sigma <= 0).
    InvalidParameter(String),
    /// An operation needs data and got none.
    EmptyInput(&'static str),
    /// A dynamical system or iteration diverged.
    Unstable(String),
    /// The reparametrization estimator needs `f`'s input gradient.
    MissingGradient,
    /// Index outside the valid parameter range.
    IndexOutOfRange { index: usize, len: usize },
    /// Invalid experiment configuration.
    Config(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Unstable(msg) => write!(f, "instability: {msg}"),
            Error::MissingGradient => write!(f, "objective does not provide an input gradient"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
