//! Token-level BERTScore.
//!
//! Texts are WordPiece-tokenized ([`tokenizer`]), embedded by a pluggable
//! [`embedding::EmbeddingProvider`], and compared by greedy cosine matching
//! ([`engine`]). The resulting [`ScoreReport`] keeps every per-token match so
//! a client can draw the alignment without recomputing anything.

pub mod embedding;
pub mod engine;
pub mod error;
pub mod report;
pub mod tokenizer;

pub use embedding::{EmbeddingProvider, EmbeddingSequence, ProviderConfig};
pub use engine::{Direction, MatchRecord, ScoreReport, SimilarityMatrix};
pub use error::{Error, Result};
pub use report::{ScoreResponse, ENGINE_VERSION};
pub use tokenizer::{Token, TokenSequence, Tokenizer, Vocab};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Cut over-long inputs to 512 tokens instead of failing.
    pub truncate: bool,
}

/// A tokenizer paired with an embedding provider.
pub struct Scorer {
    tokenizer: Tokenizer,
    provider: Box<dyn EmbeddingProvider>,
}

impl Scorer {
    pub fn new(vocab: Vocab, provider: Box<dyn EmbeddingProvider>) -> Self {
        Scorer {
            tokenizer: Tokenizer::new(vocab),
            provider,
        }
    }

    pub fn from_config(vocab: Vocab, config: &ProviderConfig) -> Result<Self> {
        Ok(Self::new(vocab, config.load()?))
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn score(&self, reference: &str, candidate: &str, options: ScoreOptions) -> Result<ScoreReport> {
        score_with(&self.tokenizer, self.provider.as_ref(), reference, candidate, options)
    }

    /// Scores a pair and wraps the result in the wire format.
    pub fn score_response(
        &self,
        reference: &str,
        candidate: &str,
        options: ScoreOptions,
    ) -> Result<ScoreResponse> {
        let report = self.score(reference, candidate, options)?;
        Ok(ScoreResponse::new(&report, self.provider_id()))
    }
}

/// Full pipeline with a borrowed tokenizer and provider: tokenize, embed,
/// match, score.
pub fn score_with(
    tokenizer: &Tokenizer,
    provider: &dyn EmbeddingProvider,
    reference: &str,
    candidate: &str,
    options: ScoreOptions,
) -> Result<ScoreReport> {
    let reference = tokenizer.tokenize(reference, options.truncate)?;
    let candidate = tokenizer.tokenize(candidate, options.truncate)?;
    let reference = provider.embed(reference)?;
    let candidate = provider.embed(candidate)?;
    engine::score_embeddings(reference, candidate)
}

/// One-shot scoring: builds the provider from `config` and scores the pair.
pub fn score(
    reference: &str,
    candidate: &str,
    vocab: Vocab,
    config: &ProviderConfig,
    options: ScoreOptions,
) -> Result<ScoreReport> {
    Scorer::from_config(vocab, config)?.score(reference, candidate, options)
}
