use alloc::string::String;
use core::fmt;

/// Errors raised by the probabilistic mutation-testing core.
///
/// Variants are grouped by the exit class the CLI maps them to: configuration
/// problems, data problems, and numerical tolerance failures.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A run parameter is out of range or inconsistent with the pools.
    Config(String),
    /// A record or pool violates the data model.
    Data(String),
    /// Too few observations for the requested statistic.
    InsufficientData { needed: usize, got: usize },
    /// Adaptive quadrature hit its subdivision cap before reaching tolerance.
    Quadrature { estimate: f64, achieved: f64, requested: f64 },
    /// A numerical self-check (mass, normalisation) failed.
    Tolerance(String),
    /// Rejection sampling exhausted its attempt budget.
    Rejection { attempts: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need at least {needed} values, got {got}")
            }
            Error::Quadrature { estimate, achieved, requested } => write!(
                f,
                "quadrature did not converge: estimate {estimate}, error {achieved:e} > requested {requested:e}"
            ),
            Error::Tolerance(msg) => write!(f, "numerical tolerance failure: {msg}"),
            Error::Rejection { attempts } => {
                write!(f, "rejection sampling failed after {attempts} attempts")
            }
        }
    }
}

impl core::error::Error for Error {}
