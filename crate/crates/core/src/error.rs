use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid discretization: {0}")]
    InvalidGrid(String),

    #[error("invalid birth profile: {0}")]
    InvalidProfile(String),

    /// The first quadrature weight alone reproduces the trace, so no
    /// positive steady state exists on this age grid.
    #[error("intensity {intensity} is at or beyond the age-grid limit 1/q_0 = {limit}; refine the age grid")]
    BeyondResolution { intensity: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("age step {step} needs {required} substeps for potential minimum {min_potential:e} (limit {limit})")]
    SubstepLimit {
        step: usize,
        min_potential: f64,
        required: usize,
        limit: usize,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("resolvent undefined: eta * r = {product} is not below 1 (r = {radius})")]
    SpectralCondition { radius: f64, product: f64 },

    #[error("iterate left the positive cone: {0}")]
    ConeViolation(String),

    #[error("singular system in {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
