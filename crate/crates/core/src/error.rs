use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    /// The instance admits no allocation. `required` is the smallest server
    /// capacity (Hz) that would make the frequency problem feasible, when known.
    #[error("infeasible: {reason}")]
    Infeasible { reason: String, required: Option<f64> },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("every schedule is excluded by the feasibility cuts")]
    AllSchedulesInfeasible,

    #[error("iteration limit {iterations} reached with gap {gap:.3e}")]
    IterationLimit { iterations: usize, gap: f64 },

    #[error("refused: {0}")]
    Refused(String),
}

impl Error {
    pub(crate) fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible {
            reason: reason.into(),
            required: None,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. } | Error::AllSchedulesInfeasible)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
