use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("digit undefined at x = {x} for map choice {omega}")]
    DigitUndefined { x: f64, omega: u8 },

    #[error("zero denominator while reconstructing a continued fraction at level {level}")]
    Reconstruction { level: usize },

    #[error("invalid branch index n = {0} (must be >= 1)")]
    InvalidIndex(u64),

    #[error("invalid Moebius matrix: {0}")]
    InvalidMatrix(&'static str),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series truncation error estimate {estimate:e} exceeds tolerance {tol:e}")]
    Truncation { estimate: f64, tol: f64 },

    #[error("enumeration of {words} words exceeds the limit {limit}")]
    EnumerationTooLarge { words: f64, limit: f64 },

    #[error("argument {0} outside the supported range")]
    Range(String),

    #[error("quadrature did not converge: rules disagree by {diff:e} (tol {tol:e})")]
    Accuracy { diff: f64, tol: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last change {change:e})")]
    GapTooSmall { iterations: usize, change: f64 },

    #[error("matrix (I - B) is numerically singular (condition estimate {condition:e})")]
    Conditioning { condition: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("p = 0 has no invariant probability density: the Renyi map only preserves the sigma-finite measure dx/x")]
    SigmaFinite,
}

pub type Result<T> = std::result::Result<T, Error>;
