use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input out of domain: {0}")]
    InputDomain(String),

    #[error("invalid depth {0} (must be finite and > 0)")]
    InvalidDepth(f64),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate configuration, singular values {singular_values:?}")]
    DegenerateConfiguration { singular_values: Vec<f64> },

    #[error("point maps to infinity (|k| = {0:e})")]
    PointAtInfinity(f64),

    #[error("registration failed: {0}")]
    RegistrationFailure(String),

    #[error("scene generation failed: {0}")]
    GenerationFailure(String),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the registration stage, which the CLI reports
    /// with a distinct exit status.
    pub fn is_registration_failure(&self) -> bool {
        matches!(self, Error::RegistrationFailure(_))
    }
}
