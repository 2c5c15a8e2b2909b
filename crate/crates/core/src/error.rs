//! Engine-wide error type.

use thiserror::Error;

use crate::backends::BackendError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus file line {line}: {msg}")]
    CorpusFormat { line: usize, msg: String },

    #[error("duplicate doc_id '{0}'")]
    DuplicateDocId(String),

    #[error("entity annotation failed for chunk '{chunk_id}': {source}")]
    Annotation {
        chunk_id: String,
        source: BackendError,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("provider mismatch: index built with '{index}', configured provider is '{configured}'")]
    ProviderMismatch { index: String, configured: String },

    #[error("index build failed after {embedded} chunks: {source}")]
    IndexBuild {
        embedded: usize,
        source: Box<EngineError>,
    },

    #[error("bad index file: {0}")]
    IndexFormat(String),

    #[error("truncated index file at byte {offset}")]
    TruncatedIndex { offset: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate clustering input: {0}")]
    DegenerateClustering(String),

    #[error("generation failed: {0}")]
    Generation(BackendError),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("io error on '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl EngineError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        EngineError::Io {
            path: path.into(),
            source,
        }
    }
}
