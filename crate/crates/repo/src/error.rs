use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RepoError {
    #[error("manifest line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("no model named `{0}` in the manifest")]
    UnknownModel(String),
    #[error("checksum mismatch for `{name}`: expected {expected}, got {actual}")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },
    #[error("source {uri} unavailable: {reason}")]
    SourceUnavailable { uri: String, reason: String },
    #[error("i/o error: {0}")]
    Io(Arc<std::io::Error>),
}

impl From<std::io::Error> for RepoError {
    fn from(e: std::io::Error) -> Self {
        RepoError::Io(Arc::new(e))
    }
}
