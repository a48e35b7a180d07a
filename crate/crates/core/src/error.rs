use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear solve or decomposition broke down. `condition_estimate` is a
    /// cheap lower bound on the 2-norm condition number of the system.
    #[error("numeric failure in {context} (condition estimate {condition_estimate:.3e})")]
    NumericFailure {
        context: String,
        condition_estimate: f64,
    },

    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the context of a numeric failure, leaving other variants alone.
    pub(crate) fn with_context(self, outer: impl std::fmt::Display) -> Self {
        match self {
            Error::NumericFailure {
                context,
                condition_estimate,
            } => Error::NumericFailure {
                context: format!("{outer}: {context}"),
                condition_estimate,
            },
            other => other,
        }
    }
}
