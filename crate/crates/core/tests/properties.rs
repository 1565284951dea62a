use std::path::PathBuf;

use bertscore_viz_core::engine::{
    f1, precision_matching, recall_matching, score_embeddings, similarity_matrix, unmatched,
    SimilarityMatrix,
};
use bertscore_viz_core::tokenizer::{normalize, pre_tokenize, wordpiece, UNK};
use bertscore_viz_core::{
    EmbeddingSequence, ProviderConfig, ScoreOptions, ScoreResponse, Scorer, Tokenizer, Vocab,
};
use ndarray::Array2;
use proptest::prelude::*;

fn vocab() -> Vocab {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/vocab.txt");
    Vocab::from_file(path).unwrap()
}

const WORDS: &[&str] = &[
    "the", "a", "cat", "sat", "on", "mat", "dog", "ran", "hello", "world", "big", "small", "red",
    "blue", "green", "house", "tree", "bird", "sky", "water", "river", "stone", "child", "read",
    "book", "quick", "brown", "fox", "jumps", "over", "lazy", "sun", "moon", "star", "night",
    "day", "walk", "run", "sing", "song", "old", "new", "happy", "sad", "city", "road",
    "unaffable", "walks", "singing", "don't",
];

fn text(max_words: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..=max_words).prop_map(|w| w.join(" "))
}

fn scorer(contextual: bool, seed: u64, dim: usize) -> Scorer {
    Scorer::from_config(vocab(), &ProviderConfig::deterministic(dim, seed, contextual)).unwrap()
}

fn matrix(max: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(k, m)| {
        // Coarse values force ties; the continuous range covers the rest.
        let entry = prop_oneof![
            prop::sample::select(vec![-0.5, 0.0, 0.25, 0.5, 1.0]),
            -1.0f64..=1.0,
        ];
        prop::collection::vec(entry, k * m)
        .prop_map(move |v| Array2::from_shape_vec((k, m), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spans_reproduce_normalized_text(s in "[a-zA-Z0-9 ,.'!?éÅ\u{00A0}-]{0,40}") {
        let tokenizer = Tokenizer::new(vocab());
        let norm = normalize(&s, true);
        let Ok(seq) = tokenizer.tokenize(&s, false) else {
            prop_assert!(norm.is_empty());
            return Ok(());
        };
        prop_assert_eq!(&seq.original_text, &norm);
        let mut covered = String::new();
        let mut last_end = 0;
        for t in seq.tokens.iter().filter(|t| !t.is_special) {
            prop_assert!(t.char_span.start >= last_end);
            last_end = t.char_span.end;
            let slice = seq.span_text(t);
            if t.surface != UNK {
                prop_assert_eq!(t.surface.trim_start_matches("##"), slice);
            }
            prop_assert_eq!(t.is_subword, t.surface.starts_with("##"));
            covered.push_str(slice);
        }
        let stripped: String = norm.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(covered, stripped);
        prop_assert!(seq.len() >= 3);
    }

    #[test]
    fn pieces_are_greedy_maximal(word in "[a-z]{1,12}") {
        let v = vocab();
        let pieces = wordpiece(&word, &v);
        if pieces == [UNK] {
            return Ok(());
        }
        let mut pos = 0;
        for piece in &pieces {
            let body = piece.trim_start_matches("##");
            prop_assert!(word[pos..].starts_with(body));
            let prefix = if pos == 0 { "" } else { "##" };
            for longer in pos + body.len() + 1..=word.len() {
                let cand = format!("{prefix}{}", &word[pos..longer]);
                prop_assert!(!v.contains(&cand), "{} was available at {}", cand, pos);
            }
            pos += body.len();
        }
        prop_assert_eq!(pos, word.len());
    }

    #[test]
    fn tokenize_is_deterministic(s in ".{0,30}") {
        let tokenizer = Tokenizer::new(vocab());
        let a = tokenizer.tokenize(&s, false);
        let b = tokenizer.tokenize(&s, false);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn pre_tokenize_spans_reslice(s in ".{0,30}") {
        let norm = normalize(&s, true);
        for (word, span) in pre_tokenize(&norm) {
            prop_assert_eq!(&norm[span], word);
        }
    }

    #[test]
    fn precision_is_recall_of_transpose(values in matrix(6)) {
        let sim = SimilarityMatrix::from_values(values);
        let (p, pm) = precision_matching(&sim);
        let (r, rm) = recall_matching(&sim.transposed());
        prop_assert_eq!(p, r);
        prop_assert_eq!(pm.len(), rm.len());
        for (a, b) in pm.iter().zip(&rm) {
            prop_assert_eq!((a.source_index, a.target_index, a.score), (b.source_index, b.target_index, b.score));
        }
    }

    #[test]
    fn match_scores_are_true_extrema(values in matrix(6)) {
        let sim = SimilarityMatrix::from_values(values.clone());
        let (_, rm) = recall_matching(&sim);
        for m in &rm {
            let row = values.row(m.source_index);
            prop_assert!(row.iter().all(|&v| m.score >= v));
            prop_assert!(row.iter().take(m.target_index).all(|&v| v < m.score));
            prop_assert_eq!(row[m.target_index], m.score);
        }
        let (_, pm) = precision_matching(&sim);
        for m in &pm {
            let col = values.column(m.source_index);
            prop_assert!(col.iter().all(|&v| m.score >= v));
            prop_assert!(col.iter().take(m.target_index).all(|&v| v < m.score));
        }
        let (ur, uc) = unmatched(&rm, &pm, values.nrows(), values.ncols());
        prop_assert!(ur.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(uc.iter().all(|j| rm.iter().all(|m| m.target_index != *j)));
        prop_assert!(ur.iter().all(|i| pm.iter().all(|m| m.target_index != *i)));
    }

    #[test]
    fn f1_lies_between(p in 1e-6f64..=1.0, r in 1e-6f64..=1.0) {
        let f = f1(p, r);
        prop_assert!(f >= p.min(r) * (1.0 - 1e-12) && f <= p.max(r) * (1.0 + 1e-12));
    }

    #[test]
    fn transpose_symmetry(a in text(8), b in text(8), contextual: bool, seed: u64) {
        let s = scorer(contextual, seed, 12);
        let ab = s.score(&a, &b, ScoreOptions::default()).unwrap();
        let ba = s.score(&b, &a, ScoreOptions::default()).unwrap();
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.recall, ba.precision);
        prop_assert!((ab.f1 - ba.f1).abs() <= 1e-12);
        prop_assert_eq!(&ab.unmatched_reference, &ba.unmatched_candidate);
    }

    #[test]
    fn identity_scores_one(t in text(8), seed: u64) {
        let r = scorer(false, seed, 8).score(&t, &t, ScoreOptions::default()).unwrap();
        prop_assert!((r.precision - 1.0).abs() <= 1e-6);
        prop_assert!((r.recall - 1.0).abs() <= 1e-6);
        prop_assert!((r.f1 - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn identity_without_repeats_matches_everything(
        words in prop::sample::subsequence(WORDS.to_vec(), 1..=8).prop_shuffle(),
    ) {
        let t = words.join(" ");
        let r = scorer(false, 0, 8).score(&t, &t, ScoreOptions::default()).unwrap();
        let surfaces: std::collections::HashSet<_> =
            r.reference_tokens.tokens.iter().map(|t| &t.surface).collect();
        prop_assume!(surfaces.len() == r.reference_tokens.len());
        prop_assert!(r.unmatched_reference.is_empty() && r.unmatched_candidate.is_empty());
        for m in &r.recall_matches {
            prop_assert_eq!(m.source_index, m.target_index);
        }
    }

    #[test]
    fn recall_never_drops_when_candidate_grows(a in text(8), b in text(7), extra in prop::sample::select(WORDS)) {
        let s = scorer(false, 0, 8);
        let before = s.score(&a, &b, ScoreOptions::default()).unwrap();
        let after = s.score(&a, &format!("{b} {extra}"), ScoreOptions::default()).unwrap();
        prop_assert!(after.recall >= before.recall);
    }

    #[test]
    fn scores_in_range(a in text(8), b in text(8), seed: u64, contextual: bool) {
        let r = scorer(contextual, seed, 4).score(&a, &b, ScoreOptions::default()).unwrap();
        for v in [r.precision, r.recall, r.f1] {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        for m in r.recall_matches.iter().chain(&r.precision_matches) {
            prop_assert!((-1.0..=1.0).contains(&m.score));
        }
    }

    #[test]
    fn wire_round_trip(a in text(6), b in text(6)) {
        let resp = scorer(true, 3, 8).score_response(&a, &b, ScoreOptions::default()).unwrap();
        let json = resp.to_json();
        let back: ScoreResponse = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &resp);
        prop_assert_eq!(back.to_json(), json);
    }
}

#[test]
fn repeated_tokens_tie_to_first_occurrence() {
    // Both copies of "on" are identical vectors, so the second copy's row is
    // a tie that resolves to column 0 and leaves column 1 unpicked.
    let r = scorer(false, 0, 8).score("on on", "on on", ScoreOptions::default()).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    let targets: Vec<usize> = r.recall_matches.iter().map(|m| m.target_index).collect();
    assert_eq!(targets, [0, 0]);
    assert_eq!(r.unmatched_candidate, [1]);
    assert_eq!(r.unmatched_reference, [1]);
}

#[test]
fn zero_rows_do_not_poison_scores() {
    let seq = Tokenizer::new(vocab()).tokenize("cat dog", false).unwrap();
    let a = EmbeddingSequence::new(seq.clone(), Array2::zeros((4, 3)), "zero".into()).unwrap();
    let b = EmbeddingSequence::new(seq, Array2::ones((4, 3)), "ones".into()).unwrap();
    let sim = similarity_matrix(&a, &b).unwrap();
    assert!(sim.values.iter().all(|&v| v == 0.0));
    let r = score_embeddings(a, b).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
}

#[test]
fn empty_text_is_rejected() {
    let s = scorer(false, 0, 8);
    assert!(matches!(
        s.score("", "cat", ScoreOptions::default()),
        Err(bertscore_viz_core::Error::EmptyInput)
    ));
    assert!(matches!(
        s.score("cat", " \t ", ScoreOptions::default()),
        Err(bertscore_viz_core::Error::EmptyInput)
    ));
}

#[test]
fn long_input_needs_truncate() {
    let s = scorer(false, 0, 8);
    let long = vec!["cat"; 600].join(" ");
    assert!(matches!(
        s.score(&long, "cat", ScoreOptions::default()),
        Err(bertscore_viz_core::Error::SequenceTooLong { len: 602, .. })
    ));
    let r = s.score(&long, "cat", ScoreOptions { truncate: true }).unwrap();
    assert_eq!(r.reference_tokens.len(), 512);
    assert_eq!(r.recall_matches.len(), 510);
}
