use thiserror::Error;

/// Errors raised by the numerical routines and the file front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("inconsistent system: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (best bound {best_bound:e})")]
    NonConvergence { iterations: usize, best_bound: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures caused by the numbers rather than by the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Solver(_) | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
