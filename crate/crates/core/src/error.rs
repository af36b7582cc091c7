use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("synthesis infeasible: {0}")]
    Infeasible(String),

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("cost ratio undefined: disturbance energy is zero")]
    UndefinedRatio,

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("malformed gains file: {0}")]
    GainsFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
