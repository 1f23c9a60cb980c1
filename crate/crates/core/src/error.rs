use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence} ({caption:?}): {message}")]
    Validation {
        sentence: usize,
        caption: String,
        message: String,
    },

    #[error("embeddings line {line}: {message}")]
    EmbeddingLoad { line: usize, message: String },

    #[error("no embedding for any token of phrase {phrase:?}")]
    OutOfVocabulary { phrase: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("record {id:?}: {message}")]
    Data { id: String, message: String },

    #[error("template {template:?} is missing placeholder {{{placeholder}}}")]
    MissingPlaceholder { template: String, placeholder: String },

    #[error("turn {turn} failed: {source}")]
    Protocol {
        turn: u8,
        #[source]
        source: ModelError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failure reported by a [`crate::promptkit::VisionLanguageModel`].
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ModelError(pub String);
