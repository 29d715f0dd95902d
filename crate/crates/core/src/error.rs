use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("node {node} cannot transmit at level {level} (needs {cost} quanta)")]
    InfeasibleAction { node: usize, level: usize, cost: usize },

    #[error("exhaustive backup too large: {size:.3e} rules exceed the limit of {limit:.3e}")]
    SearchTooLarge { size: f64, limit: f64 },

    #[error("bound point index {index} out of range ({len} points)")]
    PointOutOfRange { index: usize, len: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("no policy for SYNC state {0}")]
    MissingPolicy(usize),

    #[error("orthogonal baseline needs exactly two nodes, got {0}")]
    OrthogonalUnsupported(usize),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
