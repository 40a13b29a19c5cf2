//! Crate-wide error types.

use thiserror::Error;

/// Structured description of an infeasible problem instance: where it was
/// detected, which constraint binds, and by how much (scaled units).
#[derive(Debug, Clone)]
pub struct Infeasibility {
    pub context: String,
    pub constraint: String,
    pub deficit: f64,
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: tightest constraint `{}` short by {:.3e}",
            self.context, self.constraint, self.deficit
        )
    }
}

#[derive(Debug, Error)]
pub enum IsscError {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Index past the end of a per-user or per-target list.
    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// No feasible point exists (or none could be certified).
    #[error("infeasible: {0}")]
    Infeasible(Infeasibility),

    /// A numeric routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, IsscError>;

impl IsscError {
    pub fn domain(msg: impl Into<String>) -> Self {
        IsscError::Domain(msg.into())
    }

    pub fn infeasible(context: impl Into<String>, constraint: impl Into<String>, deficit: f64) -> Self {
        IsscError::Infeasible(Infeasibility {
            context: context.into(),
            constraint: constraint.into(),
            deficit,
        })
    }
}
