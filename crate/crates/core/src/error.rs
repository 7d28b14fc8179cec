use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate event (session {session_id}, seq {seq_id})")]
    DuplicateEvent { session_id: String, seq_id: u64 },

    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("topic model: {0}")]
    TopicModel(String),

    #[error("ranker: {0}")]
    Ranker(String),

    #[error("feature width mismatch: ensemble expects {expected} features, got {got}")]
    FeatureWidth { expected: usize, got: usize },

    #[error("feature order fingerprint mismatch: ensemble {expected:?}, input {got:?}")]
    Fingerprint { expected: String, got: String },

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing artifact from stage `{stage}`: {}", path.display())]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("malformed {what} at line {line}: {reason}")]
    Format {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, line: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            line,
            reason: reason.into(),
        }
    }
}
