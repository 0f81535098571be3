use thiserror::Error;

/// Failures of the driver, each mapped to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Core(#[from] susflow_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration and argument errors, 2 for resource limits,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(susflow_core::Error::ResourceLimit { .. }) => 2,
            CliError::Core(susflow_core::Error::NumericalFailure(_)) => 3,
            _ => 1,
        }
    }

    /// Stable machine-readable name of the failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse-error",
            CliError::Validation(_) => "validation-error",
            CliError::Core(e) => match e {
                susflow_core::Error::InvalidArgument(_) => "invalid-argument",
                susflow_core::Error::DomainViolation(_) => "domain-violation",
                susflow_core::Error::PreconditionViolation(_) => "precondition-violation",
                susflow_core::Error::ResourceLimit { .. } => "resource-limit",
                susflow_core::Error::NumericalFailure(_) => "numerical-failure",
            },
            CliError::Io(_) => "io-error",
        }
    }
}
