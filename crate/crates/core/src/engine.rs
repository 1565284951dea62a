//! Greedy cosine matching between reference and candidate embeddings.
//!
//! Recall averages, over reference tokens, the best cosine similarity any
//! candidate token reaches; precision is the same from the candidate side.
//! Matching is many-to-one: each token independently picks its best
//! partner. Special tokens never take part.

use ndarray::Array2;

use crate::embedding::EmbeddingSequence;
use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

/// Cosine similarities between scoring reference tokens (rows) and scoring
/// candidate tokens (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    /// Row `i` corresponds to reference token `ref_token_indices[i]`.
    pub ref_token_indices: Vec<usize>,
    /// Column `j` corresponds to candidate token `cand_token_indices[j]`.
    pub cand_token_indices: Vec<usize>,
}

impl SimilarityMatrix {
    /// Wraps raw values with identity index maps. Used for hand-built matrices.
    pub fn from_values(values: Array2<f64>) -> Self {
        SimilarityMatrix {
            ref_token_indices: (0..values.nrows()).collect(),
            cand_token_indices: (0..values.ncols()).collect(),
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    /// Swaps the roles of reference and candidate.
    pub fn transposed(&self) -> Self {
        SimilarityMatrix {
            values: self.values.t().to_owned(),
            ref_token_indices: self.cand_token_indices.clone(),
            cand_token_indices: self.ref_token_indices.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Reference token to its best candidate token.
    Recall,
    /// Candidate token to its best reference token.
    Precision,
}

/// One best-match edge. Indices are positions among scoring tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub direction: Direction,
    pub source_index: usize,
    pub target_index: usize,
    pub score: f64,
}

/// Everything a client needs to display a scored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub recall_matches: Vec<MatchRecord>,
    pub precision_matches: Vec<MatchRecord>,
    pub unmatched_reference: Vec<usize>,
    pub unmatched_candidate: Vec<usize>,
    pub reference_tokens: TokenSequence,
    pub candidate_tokens: TokenSequence,
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Rows of the scoring (non-special) tokens with their L2 norms.
fn scoring_rows(seq: &EmbeddingSequence) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let positions = seq.tokens().scoring_positions();
    let rows: Vec<Vec<f64>> = positions
        .iter()
        .map(|&p| seq.vectors().row(p).to_vec())
        .collect();
    let norms = rows.iter().map(|r| dot(r, r).sqrt()).collect();
    (rows, norms, positions)
}

/// Pairwise cosine similarity over scoring tokens. A zero-norm vector has
/// similarity 0 with everything.
///
/// Sums run left to right in plain `f64` so results are bit-reproducible.
pub fn similarity_matrix(
    reference: &EmbeddingSequence,
    candidate: &EmbeddingSequence,
) -> Result<SimilarityMatrix> {
    if reference.dim() != candidate.dim() {
        return Err(Error::DimensionMismatch {
            reference: reference.dim(),
            candidate: candidate.dim(),
        });
    }
    let (ref_rows, ref_norms, ref_token_indices) = scoring_rows(reference);
    let (cand_rows, cand_norms, cand_token_indices) = scoring_rows(candidate);
    if ref_token_indices.is_empty() || cand_token_indices.is_empty() {
        return Err(Error::EmptyInput);
    }
    let values = Array2::from_shape_fn((ref_rows.len(), cand_rows.len()), |(i, j)| {
        let denom = ref_norms[i] * cand_norms[j];
        if denom == 0.0 {
            0.0
        } else {
            (dot(&ref_rows[i], &cand_rows[j]) / denom).clamp(-1.0, 1.0)
        }
    });
    Ok(SimilarityMatrix {
        values,
        ref_token_indices,
        cand_token_indices,
    })
}

/// Index and value of the maximum; the first index wins ties.
fn first_argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn best_matches(values: &Array2<f64>, direction: Direction) -> (f64, Vec<MatchRecord>) {
    let matches: Vec<MatchRecord> = values
        .rows()
        .into_iter()
        .enumerate()
        .map(|(source_index, row)| {
            let (target_index, score) = first_argmax(row.iter().copied());
            MatchRecord {
                direction,
                source_index,
                target_index,
                score,
            }
        })
        .collect();
    let mean = matches.iter().map(|m| m.score).sum::<f64>() / matches.len() as f64;
    (mean, matches)
}

/// Best candidate for each reference token, and their mean score (recall).
pub fn recall_matching(sim: &SimilarityMatrix) -> (f64, Vec<MatchRecord>) {
    best_matches(&sim.values, Direction::Recall)
}

/// Best reference token for each candidate token, and their mean score (precision).
pub fn precision_matching(sim: &SimilarityMatrix) -> (f64, Vec<MatchRecord>) {
    best_matches(&sim.values.t().to_owned(), Direction::Precision)
}

/// Harmonic mean of precision and recall.
///
/// 0 unless both are positive: with `P + R <= 0` the formula is undefined, and
/// with mixed signs it leaves `[-1, 1]`.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision > 0.0 && recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Tokens that no token on the other side picked as its best match.
///
/// Returns `(unmatched_reference, unmatched_candidate)`, both ascending.
pub fn unmatched(
    recall_matches: &[MatchRecord],
    precision_matches: &[MatchRecord],
    k: usize,
    m: usize,
) -> (Vec<usize>, Vec<usize>) {
    let complement = |n: usize, hits: &[MatchRecord]| {
        let mut hit = vec![false; n];
        for r in hits {
            hit[r.target_index] = true;
        }
        (0..n).filter(|&i| !hit[i]).collect::<Vec<_>>()
    };
    (
        complement(k, precision_matches),
        complement(m, recall_matches),
    )
}

/// Scores two embedded sequences.
pub fn score_embeddings(
    reference: EmbeddingSequence,
    candidate: EmbeddingSequence,
) -> Result<ScoreReport> {
    let sim = similarity_matrix(&reference, &candidate)?;
    let (recall, recall_matches) = recall_matching(&sim);
    let (precision, precision_matches) = precision_matching(&sim);
    let (unmatched_reference, unmatched_candidate) =
        unmatched(&recall_matches, &precision_matches, sim.rows(), sim.cols());
    Ok(ScoreReport {
        precision,
        recall,
        f1: f1(precision, recall),
        recall_matches,
        precision_matches,
        unmatched_reference,
        unmatched_candidate,
        reference_tokens: reference.into_tokens(),
        candidate_tokens: candidate.into_tokens(),
    })
}
