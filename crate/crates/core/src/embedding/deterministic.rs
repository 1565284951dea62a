use ndarray::Array2;

use super::{EmbeddingProvider, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX: u64 = 0x2545_F491_4F6C_DD1D;
const POSITION_MIX: u64 = 0xD1B5_4A32_D192_ED03;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Hash-derived vector in `[-1, 1)^dim` for a token surface.
///
/// With `contextual`, the position is mixed into the hash so repeated
/// surfaces get distinct vectors.
pub fn deterministic_vector(
    surface: &str,
    position: usize,
    dim: usize,
    seed: u64,
    contextual: bool,
) -> Vec<f64> {
    let mut h = fnv1a64(surface.as_bytes()) ^ seed;
    if contextual {
        h ^= (position as u64).wrapping_mul(POSITION_MIX);
    }
    (0..dim as u64)
        .map(|j| {
            let m = (h ^ (j + 1).wrapping_mul(GOLDEN_GAMMA)).wrapping_mul(MIX);
            2.0 * (m as f64 / 18_446_744_073_709_551_616.0) - 1.0
        })
        .collect()
}

/// Model-free provider used for hermetic tests and demos.
#[derive(Debug, Clone)]
pub struct DeterministicProvider {
    dim: usize,
    seed: u64,
    contextual: bool,
    id: String,
}

impl DeterministicProvider {
    pub fn new(dim: usize, seed: u64, contextual: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ProviderLoad("dimension must be positive".into()));
        }
        Ok(DeterministicProvider {
            dim,
            seed,
            contextual,
            id: format!("deterministic-test:dim={dim},seed={seed},contextual={contextual}"),
        })
    }
}

impl EmbeddingProvider for DeterministicProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, seq: TokenSequence) -> Result<EmbeddingSequence> {
        let mut vectors = Array2::zeros((seq.len(), self.dim));
        for (position, (token, mut row)) in seq.tokens.iter().zip(vectors.rows_mut()).enumerate() {
            let v = deterministic_vector(&token.surface, position, self.dim, self.seed, self.contextual);
            row.iter_mut().zip(v).for_each(|(dst, x)| *dst = x);
        }
        EmbeddingSequence::new(seq, vectors, self.id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn same_surface_same_vector() {
        assert_eq!(
            deterministic_vector("cat", 1, 8, 0, false),
            deterministic_vector("cat", 5, 8, 0, false)
        );
        assert_ne!(
            deterministic_vector("cat", 1, 8, 0, false),
            deterministic_vector("cat", 1, 8, 1, false)
        );
    }

    #[test]
    fn contextual_depends_on_position() {
        assert_ne!(
            deterministic_vector("cat", 1, 8, 0, true),
            deterministic_vector("cat", 2, 8, 0, true)
        );
    }

    #[test]
    fn values_in_range() {
        for s in ["a", "hello", "[CLS]", "##ing"] {
            assert!(deterministic_vector(s, 3, 64, 42, true)
                .iter()
                .all(|v| (-1.0..1.0).contains(v)));
        }
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(
            DeterministicProvider::new(0, 0, false),
            Err(Error::ProviderLoad(_))
        ));
    }
}
