use alloc::string::String;

/// Errors surfaced by the solver stack.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{op} did not converge within {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },

    /// No fresh direction could be found to continue a Krylov basis.
    #[error("rank exhausted: no independent direction found at dimension {0}")]
    RankExhausted(usize),

    #[error("iteration diverged: {0}")]
    Diverged(String),
}

pub type Result<T> = core::result::Result<T, Error>;
