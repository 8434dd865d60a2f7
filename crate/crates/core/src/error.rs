use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the set where the function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructor or config value violates an invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("root finding failed to reach {target} on bracket [{lo}, {hi}]")]
    RootFinding { target: f64, lo: f64, hi: f64 },

    #[error("linear solve did not reach tolerance {tol:e}; residual history {history:?}")]
    LinearSolve { tol: f64, history: Vec<f64> },

    #[error("non-finite value at node (j={j}, i={i}) in iteration {iteration}")]
    NotFinite { j: usize, i: usize, iteration: usize },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
