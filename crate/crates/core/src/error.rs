use thiserror::Error;

#[derive(Debug, Error)]
pub enum VoiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid degradation spec: {0}")]
    InvalidSpec(String),

    #[error("numerical failure in trajectory {trajectory}: {reason}")]
    Numerical { trajectory: String, reason: String },

    #[error("empty file: {0}")]
    EmptyFile(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VoiError>;

impl VoiError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        VoiError::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VoiError::InvalidInput(msg.into())
    }
}
