use thiserror::Error;

/// Errors produced by the estimator library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("image series did not converge within {terms} terms (last term magnitude {last_term:e})")]
    SeriesNotConverged { terms: usize, last_term: f64 },

    #[error("quadrature did not converge: value {value:e}, estimated error {est_error:e}")]
    QuadratureNotConverged { value: f64, est_error: f64 },

    #[error("ill-conditioned linear system (condition number {condition:e}); try a smaller order or a wider band")]
    IllConditioned { condition: f64 },

    #[error("optimizer failed: {0}")]
    Optimizer(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that come from numerical non-convergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SeriesNotConverged { .. } | Error::QuadratureNotConverged { .. } | Error::Optimizer(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
