use thiserror::Error;

pub type Result<T> = std::result::Result<T, PhError>;

/// Errors raised by model construction, solvers and analysis routines.
#[derive(Debug, Error)]
pub enum PhError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular Jacobian at iteration {iteration} (residual {residual:.3e}); try a perturbed initial guess")]
    SingularJacobian { iteration: usize, residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("trajectory diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("not output-feedback passifiable by this condition (gamma is infinite)")]
    NotPassifiable,
}

impl PhError {
    pub(crate) fn dim(field: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        PhError::Dimension {
            field,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
