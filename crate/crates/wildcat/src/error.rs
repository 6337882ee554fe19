//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Operand shapes do not conform.
    DimensionMismatch(String),
    /// A precondition of an operation was violated by the caller.
    ContractViolation(String),
    /// NaN or infinity where a finite value is required.
    NonFinite(String),
    /// Scalar argument outside the supported domain.
    Domain(String),
    /// A linear system had no usable solution.
    Singular(String),
    /// A desk-scale oracle guard was exceeded.
    SizeGuard(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::ContractViolation(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
            Error::SizeGuard(msg) => write!(f, "size guard exceeded: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
