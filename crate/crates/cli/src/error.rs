use hardyflow_core::Error as CoreError;

/// Failure of a run, carrying its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, keys, values or files: exit 2.
    #[error("{0}")]
    Usage(String),
    /// A solver failed: exit 1.
    #[error("{0}")]
    Numerical(String),
    /// Replay produced different bytes: exit 1.
    #[error("digest mismatch: {}", .0.join(", "))]
    Divergent(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Divergent(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Dimension(_)
            | CoreError::Range { .. }
            | CoreError::Config(_)
            | CoreError::Infeasible { .. }
            | CoreError::Format(_) => CliError::Usage(e.to_string()),
            CoreError::Convergence(_)
            | CoreError::Numerical(_)
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::Singular(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
