use thiserror::Error;

/// Errors produced by corpus loading, model training/serialization, grammar
/// loading and prediction alignment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("alignment error in sentence {sentence}: {msg}")]
    Alignment { sentence: String, msg: String },

    #[error("grammar error: {0}")]
    Grammar(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
