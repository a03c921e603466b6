use std::fmt;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension N={0} is below 3")]
    Dimension(usize),

    #[error("{what} = {value} is outside {range}")]
    Range {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("weight exponent {exponent} is not integrable on an element touching the origin")]
    Infeasible { exponent: f64 },

    #[error("{0}")]
    Convergence(ConvergenceFailure),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("singular matrix at row {0}")]
    Singular(usize),

    #[error("malformed dump: {0}")]
    Format(String),
}

/// Diagnostic attached to an iteration that hit its cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceFailure {
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
}

impl fmt::Display for ConvergenceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} did not converge after {} iterations (residual {:e})",
            self.solver, self.iterations, self.residual
        )
    }
}

impl Error {
    pub(crate) fn range(what: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::Range {
            what,
            value,
            range: range.into(),
        }
    }

    pub(crate) fn convergence(solver: &'static str, iterations: usize, residual: f64) -> Self {
        Error::Convergence(ConvergenceFailure {
            solver,
            iterations,
            residual,
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
