//! Per-token vector sequences and the providers that produce them.

mod bert;
mod deterministic;

use std::path::PathBuf;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

pub use bert::{BertConfig, BertProvider};
pub use deterministic::{deterministic_vector, fnv1a64, DeterministicProvider};

/// Tokens paired with one embedding row per token, specials included.
#[derive(Debug, Clone)]
pub struct EmbeddingSequence {
    tokens: TokenSequence,
    vectors: Array2<f64>,
    provider_id: String,
}

impl EmbeddingSequence {
    /// Fails with `ProviderRuntime` if the row count is off, the width is zero
    /// or any entry is not finite.
    pub fn new(tokens: TokenSequence, vectors: Array2<f64>, provider_id: String) -> Result<Self> {
        if vectors.nrows() != tokens.len() {
            return Err(Error::ProviderRuntime(format!(
                "{} rows for {} tokens",
                vectors.nrows(),
                tokens.len()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::ProviderRuntime("zero-width embeddings".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::ProviderRuntime("non-finite embedding value".into()));
        }
        Ok(EmbeddingSequence {
            tokens,
            vectors,
            provider_id,
        })
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn into_tokens(self) -> TokenSequence {
        self.tokens
    }
}

/// Anything that can embed a token sequence. Implementations must be safe to
/// call from many threads at once.
pub trait EmbeddingProvider: Send + Sync {
    /// Names the provider and its configuration; echoed in score reports.
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, seq: TokenSequence) -> Result<EmbeddingSequence>;
}

/// Selects and parameterizes a provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderConfig {
    /// Hash-derived vectors; no model needed.
    DeterministicTest { dim: usize, seed: u64, contextual: bool },
    /// A BERT checkpoint on local disk: a directory holding `config.json` and
    /// `model.safetensors`, or the path of the `.safetensors` file itself.
    /// `layer` indexes hidden states: 0 is the embedding output, negative
    /// values count back from the last layer.
    ModelFile { model_path: PathBuf, layer: i64 },
}

impl ProviderConfig {
    pub fn deterministic(dim: usize, seed: u64, contextual: bool) -> Self {
        ProviderConfig::DeterministicTest {
            dim,
            seed,
            contextual,
        }
    }

    pub fn model_file(model_path: impl Into<PathBuf>) -> Self {
        ProviderConfig::ModelFile {
            model_path: model_path.into(),
            layer: -1,
        }
    }

    /// Builds the provider, loading weights from disk where required.
    pub fn load(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderConfig::DeterministicTest {
                dim,
                seed,
                contextual,
            } => Box::new(DeterministicProvider::new(*dim, *seed, *contextual)?),
            ProviderConfig::ModelFile { model_path, layer } => {
                Box::new(BertProvider::load(model_path, *layer)?)
            }
        })
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::deterministic(8, 0, false)
    }
}
