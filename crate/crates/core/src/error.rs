use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// A computation would exceed a configured size cap. `admissible` carries
    /// the largest value of the driving parameter that is known to fit.
    #[error("resource limit: {what}")]
    ResourceLimit { what: String, admissible: Option<f64> },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainViolation(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>, admissible: Option<f64>) -> Self {
        Error::ResourceLimit {
            what: msg.into(),
            admissible,
        }
    }
}
