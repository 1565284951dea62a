//! WordPiece tokenization compatible with uncased BERT vocabularies.
//!
//! Text goes through [`normalize`], is split into words by [`pre_tokenize`],
//! and each word is broken into subword pieces by greedy longest-match
//! lookup against a [`Vocab`]. Every token carries a half-open byte span into
//! the normalized text.

use std::collections::HashMap;
use std::io::BufRead;
use std::ops::Range;

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Hard limit on tokens per sequence, specials included.
pub const MAX_SEQUENCE_LEN: usize = 512;

/// Words longer than this many codepoints become a single `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

const CONTINUATION: &str = "##";

const DEMO_VOCAB: &str = include_str!("../fixtures/vocab.txt");

/// A WordPiece vocabulary. Ids are the 0-based line numbers of the vocab file.
#[derive(Debug, Clone)]
pub struct Vocab {
    surfaces: Vec<String>,
    ids: HashMap<String, u32>,
    unk_id: u32,
    cls_id: u32,
    sep_id: u32,
    lowercase: bool,
}

impl Vocab {
    /// Builds a vocabulary from surfaces in id order.
    pub fn from_surfaces<I, S>(surfaces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids = HashMap::new();
        let mut ordered = Vec::new();
        for (line, surface) in surfaces.into_iter().enumerate() {
            let surface = surface.into();
            if ids.insert(surface.clone(), line as u32).is_some() {
                return Err(Error::DuplicateVocabEntry { surface, line });
            }
            ordered.push(surface);
        }
        let required = |s: &str| {
            ids.get(s)
                .copied()
                .ok_or_else(|| Error::IncompleteVocab(s.to_string()))
        };
        Ok(Vocab {
            unk_id: required(UNK)?,
            cls_id: required(CLS)?,
            sep_id: required(SEP)?,
            surfaces: ordered,
            ids,
            lowercase: true,
        })
    }

    /// Reads a newline-delimited vocabulary file: line `i` holds the surface for id `i`.
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut surfaces = Vec::new();
        for line in source.lines() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            surfaces.push(line.to_string());
        }
        Self::from_surfaces(surfaces)
    }

    /// A 65-entry English vocabulary bundled for demos and hermetic tests.
    /// Real models need their own vocab file.
    pub fn demo() -> Self {
        Self::load(DEMO_VOCAB.as_bytes()).expect("bundled vocab is valid")
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }

    /// Toggles lowercasing and accent stripping during normalization (on by default).
    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.ids.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.ids.contains_key(surface)
    }

    pub fn surface(&self, id: u32) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn cls_id(&self) -> u32 {
        self.cls_id
    }

    pub fn sep_id(&self) -> u32 {
        self.sep_id
    }
}

/// One WordPiece unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Continuation pieces keep their `##` prefix.
    pub surface: String,
    pub id: u32,
    /// Byte range into the normalized text. Empty for `[CLS]`/`[SEP]`.
    pub char_span: Range<usize>,
    pub is_special: bool,
    pub is_subword: bool,
}

impl Token {
    fn special(surface: &str, id: u32, at: usize) -> Self {
        Token {
            surface: surface.to_string(),
            id,
            char_span: at..at,
            is_special: true,
            is_subword: false,
        }
    }

    fn piece(surface: String, id: u32, char_span: Range<usize>) -> Self {
        let is_subword = surface.starts_with(CONTINUATION);
        Token {
            surface,
            id,
            char_span,
            is_special: false,
            is_subword,
        }
    }
}

/// A tokenized text, bracketed by `[CLS]` and `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    /// The normalized text all spans index into.
    pub original_text: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Positions of the tokens that take part in scoring.
    pub fn scoring_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_special)
            .map(|(i, _)| i)
            .collect()
    }

    /// Text covered by a token's span.
    pub fn span_text(&self, token: &Token) -> &str {
        &self.original_text[token.char_span.clone()]
    }
}

fn is_control(c: char) -> bool {
    if matches!(c, '\t' | '\n' | '\r') {
        return false;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::Control | GeneralCategory::Format
    )
}

fn is_whitespace(c: char) -> bool {
    c.is_whitespace() || get_general_category(c) == GeneralCategory::SpaceSeparator
}

/// ASCII symbol ranges count as punctuation alongside the Unicode `P*` categories.
pub fn is_punctuation(c: char) -> bool {
    if matches!(c as u32, 33..=47 | 58..=64 | 91..=96 | 123..=126) {
        return true;
    }
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Canonicalizes text before splitting.
///
/// Applies NFC, drops control characters, collapses whitespace runs to one
/// space and trims. With `lowercase`, also lowercases and strips combining
/// accents (nonspacing marks after canonical decomposition).
pub fn normalize(text: &str, lowercase: bool) -> String {
    let cleaned: String = text
        .nfc()
        .filter(|&c| c != '\0' && c != '\u{FFFD}' && !is_control(c))
        .map(|c| if is_whitespace(c) { ' ' } else { c })
        .collect();

    let folded = if lowercase {
        cleaned
            .to_lowercase()
            .nfd()
            .filter(|&c| get_general_category(c) != GeneralCategory::NonspacingMark)
            .nfc()
            .collect()
    } else {
        cleaned
    };

    let mut out = String::with_capacity(folded.len());
    for word in folded.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits normalized text on whitespace, isolating each punctuation codepoint.
pub fn pre_tokenize(text: &str) -> Vec<(&str, Range<usize>)> {
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_whitespace(c) || is_punctuation(c) {
            if let Some(s) = start.take() {
                words.push((&text[s..i], s..i));
            }
            if !is_whitespace(c) {
                let end = i + c.len_utf8();
                words.push((&text[i..end], i..end));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        words.push((&text[s..], s..text.len()));
    }
    words
}

/// Greedy longest-match-first split of one word. Returns the byte end of each
/// piece, or `None` when the word cannot be covered.
fn wordpiece_ends(word: &str, vocab: &Vocab) -> Option<Vec<usize>> {
    if word.chars().count() > MAX_WORD_CHARS {
        return None;
    }
    let mut boundaries: Vec<usize> = word.char_indices().map(|(i, _)| i).collect();
    boundaries.push(word.len());

    let mut ends = Vec::new();
    let mut start_idx = 0;
    let mut candidate = String::new();
    while start_idx + 1 < boundaries.len() {
        let start = boundaries[start_idx];
        let found = (start_idx + 1..boundaries.len()).rev().find(|&end_idx| {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.push_str(&word[start..boundaries[end_idx]]);
            vocab.contains(&candidate)
        })?;
        ends.push(boundaries[found]);
        start_idx = found;
    }
    Some(ends)
}

/// Breaks a single whitespace-free word into vocabulary surfaces.
pub fn wordpiece(word: &str, vocab: &Vocab) -> Vec<String> {
    match wordpiece_ends(word, vocab) {
        Some(ends) => {
            let mut start = 0;
            ends.into_iter()
                .map(|end| {
                    let piece = if start == 0 {
                        word[..end].to_string()
                    } else {
                        format!("{CONTINUATION}{}", &word[start..end])
                    };
                    start = end;
                    piece
                })
                .collect()
        }
        None => vec![UNK.to_string()],
    }
}

/// Tokenizer over a shared vocabulary. Immutable and `Sync`.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vocab,
}

impl Tokenizer {
    pub fn new(vocab: Vocab) -> Self {
        Tokenizer { vocab }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Normalizes, splits and wordpieces `text`, wrapping it in `[CLS]`/`[SEP]`.
    ///
    /// Sequences over [`MAX_SEQUENCE_LEN`] are an error unless `truncate` is set,
    /// in which case pieces past position 510 are dropped.
    pub fn tokenize(&self, text: &str, truncate: bool) -> Result<TokenSequence> {
        let vocab = &self.vocab;
        let normalized = normalize(text, vocab.lowercase());

        let mut tokens = vec![Token::special(CLS, vocab.cls_id(), 0)];
        for (word, span) in pre_tokenize(&normalized) {
            match wordpiece_ends(word, vocab) {
                Some(ends) => {
                    let mut start = 0;
                    for end in ends {
                        let surface = if start == 0 {
                            word[..end].to_string()
                        } else {
                            format!("{CONTINUATION}{}", &word[start..end])
                        };
                        let id = vocab.id(&surface).expect("matched piece is in vocab");
                        let range = span.start + start..span.start + end;
                        tokens.push(Token::piece(surface, id, range));
                        start = end;
                    }
                }
                None => tokens.push(Token::piece(UNK.to_string(), vocab.unk_id(), span)),
            }
        }

        if tokens.len() == 1 {
            return Err(Error::EmptyInput);
        }
        let total = tokens.len() + 1;
        if total > MAX_SEQUENCE_LEN {
            if !truncate {
                return Err(Error::SequenceTooLong {
                    len: total,
                    max: MAX_SEQUENCE_LEN,
                });
            }
            tokens.truncate(MAX_SEQUENCE_LEN - 1);
        }
        let end = tokens.last().map_or(0, |t| t.char_span.end);
        tokens.push(Token::special(SEP, vocab.sep_id(), end));

        Ok(TokenSequence {
            tokens,
            original_text: normalized,
        })
    }
}
