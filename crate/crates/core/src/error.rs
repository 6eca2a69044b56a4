use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A Fourier star whose radius drops below the admissible floor.
    #[error("star radius {radius:.6} at theta = {theta:.6} is below the admissible minimum {min:.6}")]
    DegenerateStar { theta: f64, radius: f64, min: f64 },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("empty interior: every degree of freedom is constrained")]
    EmptyInterior,

    #[error("factorization breakdown at pivot {index} (value {pivot:e})")]
    FactorizationBreakdown { index: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
