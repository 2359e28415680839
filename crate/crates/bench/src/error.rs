use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] amec_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid argument `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{failed} of {checked} validation checks failed")]
    Validation { failed: usize, checked: usize },
}

impl BenchError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        BenchError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(e) if e.is_infeasible() => 2,
            BenchError::Core(amec_core::Error::IterationLimit { .. }) => 3,
            BenchError::Core(
                amec_core::Error::Config { .. }
                | amec_core::Error::Parse { .. }
                | amec_core::Error::Io(_)
                | amec_core::Error::Refused(_),
            ) => 4,
            BenchError::Config { .. } => 4,
            BenchError::Validation { .. } => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
