//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed graph input (non-square weights, negative weight, nonzero diagonal).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// Dimension below the minimum an operation supports.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// The spectral gap vanished (disconnected or near-disconnected graph).
    #[error("spectral gap error: {0}")]
    SpectralGap(String),

    /// Degenerate sampling interval or sample count.
    #[error("invalid range: {0}")]
    InvalidRange(String),

    /// Bracket expansion ran away; the cost ensemble is not coercive.
    #[error("unbounded problem: no minimizer found with |y| <= {limit:e}")]
    UnboundedProblem { limit: f64 },

    /// Vector or matrix shapes do not line up.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A physical or design parameter is out of its admissible set.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A standing assumption on the scenario fails (balance, connectivity, ...).
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// Scenario configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state component left the finite range during integration.
    #[error("divergence at t = {time:.6}: state component {component} is {value}")]
    Divergence {
        time: f64,
        component: usize,
        value: f64,
    },

    /// Scenario file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
