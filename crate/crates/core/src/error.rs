use thiserror::Error;

/// Every failure the scoring pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate vocabulary entry {surface:?} on line {line}")]
    DuplicateVocabEntry { surface: String, line: usize },

    #[error("vocabulary is missing required entry {0:?}")]
    IncompleteVocab(String),

    #[error("failed to read vocabulary: {0}")]
    VocabIo(#[from] std::io::Error),

    #[error("input has no scoring tokens")]
    EmptyInput,

    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("embedding dimensions differ: {reference} vs {candidate}")]
    DimensionMismatch { reference: usize, candidate: usize },

    #[error("failed to load embedding provider: {0}")]
    ProviderLoad(String),

    #[error("embedding provider failed: {0}")]
    ProviderRuntime(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI and the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateVocabEntry { .. } | Error::IncompleteVocab(_) | Error::VocabIo(_) => {
                "BAD_VOCAB"
            }
            Error::EmptyInput => "EMPTY_INPUT",
            Error::SequenceTooLong { .. } => "SEQUENCE_TOO_LONG",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::ProviderLoad(_) | Error::ProviderRuntime(_) => "PROVIDER_UNAVAILABLE",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
