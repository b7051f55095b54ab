use thiserror::Error;

/// Errors raised by the numerical and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("traffic intensity {rho} exceeds 1")]
    Unstable { rho: f64 },

    #[error("no sign change on [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("root finder did not converge within {iterations} iterations")]
    RootNotConverged { iterations: usize },

    #[error("quadrature on [{a}, {b}] stopped at error {error:e} above tolerance {tolerance:e}")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        tolerance: f64,
        best: Estimate,
    },

    #[error("fixed-point solve failed at w = {w}: {source}")]
    Tabulation { w: f64, source: Box<Error> },

    #[error("busy period {period} exceeded the cap of {cap} jobs; load is too close to 1 for this horizon")]
    JobCap { period: usize, cap: u64 },

    #[error("empty sample")]
    EmptySample,
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
