use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("unknown tweet {0:?}")]
    UnknownTweet(String),

    #[error("modularity is undefined for a graph without edges")]
    EdgelessGraph,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("vocabulary mismatch: checkpoint expects {expected}, found {found}")]
    VocabularyMismatch { expected: String, found: String },

    #[error("corrupt workspace manifest: {0}")]
    CorruptManifest(String),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
