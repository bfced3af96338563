use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{CheckedInequality, Theorem};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("missing {0}")]
    Missing(String),

    #[error("{0}")]
    Rejected(Rejection),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("integration aborted at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rate fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The named hypotheses a certifier found violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub theorem: Theorem,
    pub violated: Vec<CheckedInequality>,
}

impl Rejection {
    pub fn names(&self) -> Vec<&str> {
        self.violated.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.violated.iter().any(|c| c.name == name)
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} hypotheses rejected:", self.theorem)?;
        for c in &self.violated {
            write!(f, " [{} violated: lhs={}, rhs={}", c.name, c.lhs, c.rhs)?;
            if let Some(t) = c.at_time {
                write!(f, " at t={t}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}
