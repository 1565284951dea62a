//! The v1 JSON wire format for score reports.

use serde::{Deserialize, Serialize};

use crate::engine::{MatchRecord, ScoreReport};
use crate::tokenizer::{Token, TokenSequence};

/// Version of the scoring engine, reported in every response.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Identifier of the wire schema served by this crate.
pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireToken {
    pub surface: String,
    /// Half-open byte range into the normalized text.
    pub char_span: [usize; 2],
    pub is_special: bool,
    pub is_subword: bool,
}

impl From<&Token> for WireToken {
    fn from(t: &Token) -> Self {
        WireToken {
            surface: t.surface.clone(),
            char_span: [t.char_span.start, t.char_span.end],
            is_special: t.is_special,
            is_subword: t.is_subword,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireMatch {
    pub source: usize,
    pub target: usize,
    pub score: f64,
}

impl From<&MatchRecord> for WireMatch {
    fn from(m: &MatchRecord) -> Self {
        WireMatch {
            source: m.source_index,
            target: m.target_index,
            score: m.score,
        }
    }
}

/// A serialized [`ScoreReport`]. Field order is the on-the-wire key order.
///
/// Match and unmatched indices count scoring tokens only; the token lists
/// include the specials, flagged `is_special`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreResponse {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub reference_tokens: Vec<WireToken>,
    pub candidate_tokens: Vec<WireToken>,
    pub recall_matches: Vec<WireMatch>,
    pub precision_matches: Vec<WireMatch>,
    pub unmatched_reference: Vec<usize>,
    pub unmatched_candidate: Vec<usize>,
    pub provider_id: String,
    pub engine_version: String,
}

fn wire_tokens(seq: &TokenSequence) -> Vec<WireToken> {
    seq.tokens.iter().map(WireToken::from).collect()
}

impl ScoreResponse {
    pub fn new(report: &ScoreReport, provider_id: impl Into<String>) -> Self {
        ScoreResponse {
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            reference_tokens: wire_tokens(&report.reference_tokens),
            candidate_tokens: wire_tokens(&report.candidate_tokens),
            recall_matches: report.recall_matches.iter().map(WireMatch::from).collect(),
            precision_matches: report.precision_matches.iter().map(WireMatch::from).collect(),
            unmatched_reference: report.unmatched_reference.clone(),
            unmatched_candidate: report.unmatched_candidate.clone(),
            provider_id: provider_id.into(),
            engine_version: ENGINE_VERSION.to_string(),
        }
    }

    /// Compact JSON, the exact body the service sends.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("score response serializes")
    }
}
