use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("opinion state must contain at least one agent")]
    Empty,

    #[error("opinions ({opinions}) and bounds ({bounds}) have different lengths")]
    LengthMismatch { opinions: usize, bounds: usize },

    #[error("non-finite {what} at agent {agent}")]
    NonFinite { what: &'static str, agent: usize },

    #[error("confidence bound at agent {agent} must be strictly positive (got {value})")]
    NonPositiveBound { agent: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("equi-topology vectors are undefined for a single agent")]
    SingleAgent,

    #[error("structural invariant violated: {0}")]
    Structural(String),

    #[error("linear solve failed: matrix is singular (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },

    #[error("iteration did not converge within {max_iter} steps ({what})")]
    NonConvergence { what: &'static str, max_iter: usize },

    #[error("per-step convergence factor undefined for agent {agent}")]
    UndefinedFactor { agent: usize },

    #[error("scenario error: {0}")]
    Scenario(String),
}
