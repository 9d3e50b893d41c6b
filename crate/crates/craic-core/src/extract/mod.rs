//! Mining of method/comment pairs from Java source.

mod lexer;
mod miner;

pub use lexer::{
    is_keyword, lex_java, LexDiagnostic, LexErrorKind, LexOutput, SourceToken, TokenKind,
};
pub use miner::{mine_pairs, MethodFullCommentPair, MineIssue, MineOutput, RawComment, RawMethod};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("empty corpus: no pairs to aggregate")]
    EmptyCorpus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusLengthStats {
    pub pair_count: usize,
    pub methods: LengthStats,
    pub comments: LengthStats,
}

fn length_stats(mut lengths: Vec<usize>) -> LengthStats {
    debug_assert!(!lengths.is_empty());
    lengths.sort_unstable();
    let n = lengths.len();
    let mean = lengths.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 {
        lengths[n / 2] as f64
    } else {
        (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
    };
    // Quartiles by nearest rank: the ceil(p*n)-th smallest value.
    let nearest = |p: f64| -> f64 {
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        lengths[rank - 1] as f64
    };
    LengthStats {
        mean,
        median,
        q1: nearest(0.25),
        q3: nearest(0.75),
    }
}

/// Token-length statistics over a mined corpus. Method length counts the
/// signature plus body tokens (whitespace and comments are already absent);
/// comment length counts the tokenized full-comment text.
pub fn corpus_stats(pairs: &[MethodFullCommentPair]) -> Result<CorpusLengthStats, ExtractError> {
    let method_lengths: Vec<usize> = pairs
        .iter()
        .map(|p| p.method.signature_tokens.len() + p.method.body_tokens.len())
        .collect();
    let comment_lengths: Vec<usize> = pairs
        .iter()
        .map(|p| crate::textprep::tokenize_comment(&p.comment.text).len())
        .collect();
    stats_from_lengths(method_lengths, comment_lengths)
}

/// Same aggregation from already-computed token counts, for callers that
/// hold pair records rather than mined pairs.
pub fn stats_from_lengths(
    method_lengths: Vec<usize>,
    comment_lengths: Vec<usize>,
) -> Result<CorpusLengthStats, ExtractError> {
    if method_lengths.is_empty() {
        return Err(ExtractError::EmptyCorpus);
    }
    Ok(CorpusLengthStats {
        pair_count: method_lengths.len(),
        methods: length_stats(method_lengths),
        comments: length_stats(comment_lengths),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_with_method_len(len: usize) -> MethodFullCommentPair {
        // One signature token plus len-1 body tokens.
        let tok = |text: &str| SourceToken {
            text: text.to_string(),
            kind: TokenKind::Identifier,
            line: 2,
            column: 1,
        };
        MethodFullCommentPair {
            method: RawMethod {
                signature_tokens: vec![tok("f")],
                body_tokens: (0..len - 1).map(|_| tok("x")).collect(),
                name: "f".into(),
                file_id: "T.java".into(),
                start_line: 2,
            },
            comment: RawComment {
                text: "does things".into(),
                start_line: 1,
                is_javadoc_style: false,
            },
        }
    }

    #[test]
    fn four_pair_example() {
        let pairs: Vec<_> = [10, 20, 30, 100].iter().map(|&n| pair_with_method_len(n)).collect();
        let stats = corpus_stats(&pairs).unwrap();
        assert_eq!(stats.methods.median, 25.0);
        assert_eq!(stats.methods.mean, 40.0);
        assert_eq!(stats.methods.q1, 10.0);
        assert_eq!(stats.methods.q3, 30.0);
    }

    #[test]
    fn singleton() {
        let stats = corpus_stats(&[pair_with_method_len(17)]).unwrap();
        assert_eq!(stats.methods.mean, 17.0);
        assert_eq!(stats.methods.median, 17.0);
        assert_eq!(stats.methods.q1, 17.0);
        assert_eq!(stats.methods.q3, 17.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(corpus_stats(&[]), Err(ExtractError::EmptyCorpus)));
    }

    #[test]
    fn comment_lengths_use_tokenizer() {
        let stats = corpus_stats(&[pair_with_method_len(5)]).unwrap();
        // "does things" -> [does, things]
        assert_eq!(stats.comments.mean, 2.0);
    }
}
