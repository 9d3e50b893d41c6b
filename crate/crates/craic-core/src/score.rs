//! Entailment scoring: perplexity per comment sentence, corpus ranking, and
//! aggregate reports.
//!
//! Lower perplexity means the model predicts the sentence more easily from
//! the code, i.e. the sentence is more strongly entailed and carries less
//! information of its own. The ranked report lists sentences lowest
//! perplexity first.

use crate::compress::CompressedMethod;
use crate::neural::{lm_log_prob, seq2seq_log_prob, ModelCheckpoint, ModelKind, NeuralError};
use crate::records::CorpusRecord;
use crate::textprep::CommentSentence;
use crate::vocab::{Vocabulary, UNK};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("zero-length sentence cannot be scored")]
    ZeroLength,
    #[error("vocabulary mismatch: checkpoint was trained with {expected}, corpus uses {actual}")]
    VocabMismatch { expected: String, actual: String },
    #[error("unknown pair id in label map: {0}")]
    UnknownPairId(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// A scored comment sentence. `rank` is 0 until assigned by [`rank_corpus`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub pair_id: String,
    pub sentence_tokens: Vec<String>,
    pub javadoc_tag: Option<String>,
    pub log_prob: f64,
    /// Number of predictions charged: the sentence tokens plus EOS.
    pub n_tokens: usize,
    pub perplexity: f64,
    pub cross_entropy_bits: f64,
    pub rank: usize,
    /// Fraction of sentence tokens that encoded to UNK.
    pub unk_fraction: f64,
    pub file: String,
    pub line: u32,
    pub sentence_text: String,
    /// The method side was empty and the model scored from a zero state.
    pub empty_method: bool,
}

/// pp = exp(-logProb / n): the inverse geometric-mean per-token probability.
pub fn perplexity(log_prob: f64, n_tokens: usize) -> Result<f64, ScoreError> {
    if n_tokens == 0 {
        return Err(ScoreError::ZeroLength);
    }
    Ok((-log_prob / n_tokens as f64).exp())
}

/// Cross-entropy in bits per token; pp = 2^xe.
pub fn cross_entropy(log_prob: f64, n_tokens: usize) -> Result<f64, ScoreError> {
    if n_tokens == 0 {
        return Err(ScoreError::ZeroLength);
    }
    Ok(-log_prob / (n_tokens as f64 * std::f64::consts::LN_2))
}

/// Refuse to score when the checkpoint's recorded vocabulary hashes do not
/// match the vocabularies about to be used.
pub fn verify_vocab_hashes(
    checkpoint: &ModelCheckpoint,
    method_hash: Option<&str>,
    comment_hash: &str,
) -> Result<(), ScoreError> {
    if checkpoint.vocab_hash_comment != comment_hash {
        return Err(ScoreError::VocabMismatch {
            expected: checkpoint.vocab_hash_comment.clone(),
            actual: comment_hash.to_string(),
        });
    }
    if checkpoint.kind == ModelKind::Seq2Seq {
        let actual = method_hash.unwrap_or("-");
        if checkpoint.vocab_hash_method != actual {
            return Err(ScoreError::VocabMismatch {
                expected: checkpoint.vocab_hash_method.clone(),
                actual: actual.to_string(),
            });
        }
    }
    Ok(())
}

/// Score one compressed-method/sentence pair. The LM ignores the method; the
/// seq2seq model conditions on it.
pub fn score_pair(
    checkpoint: &ModelCheckpoint,
    method_vocab: Option<&Vocabulary>,
    comment_vocab: &Vocabulary,
    method: &CompressedMethod,
    sentence: &CommentSentence,
    file: &str,
    line: u32,
) -> Result<ScoredSentence, ScoreError> {
    let comment_ids = comment_vocab.encode(&sentence.tokens, true);
    let n_tokens = comment_ids.len() - 1;
    if sentence.tokens.is_empty() {
        return Err(ScoreError::ZeroLength);
    }
    let (log_prob, empty_method) = match checkpoint.kind {
        ModelKind::Lm => (lm_log_prob(&checkpoint.decoder, &comment_ids)?, false),
        ModelKind::Seq2Seq => {
            let mv = method_vocab.expect("seq2seq scoring requires a method vocabulary");
            let method_ids = mv.encode(&method.tokens, false);
            let encoder = checkpoint
                .encoder
                .as_ref()
                .expect("seq2seq checkpoint carries an encoder");
            let score =
                seq2seq_log_prob(encoder, &checkpoint.decoder, &method_ids, &comment_ids)?;
            (score.log_prob, score.empty_method)
        }
    };
    let unk = comment_ids[1..comment_ids.len() - 1]
        .iter()
        .filter(|&&id| id == UNK)
        .count();
    Ok(ScoredSentence {
        pair_id: sentence.source_pair_id.clone(),
        sentence_tokens: sentence.tokens.clone(),
        javadoc_tag: sentence.javadoc_tag.clone(),
        log_prob,
        n_tokens,
        perplexity: perplexity(log_prob, n_tokens)?,
        cross_entropy_bits: cross_entropy(log_prob, n_tokens)?,
        rank: 0,
        unk_fraction: unk as f64 / sentence.tokens.len() as f64,
        file: file.to_string(),
        line,
        sentence_text: sentence.text.clone(),
        empty_method,
    })
}

/// Score one prep-stage corpus record (the method is already compressed).
pub fn score_record(
    checkpoint: &ModelCheckpoint,
    method_vocab: Option<&Vocabulary>,
    comment_vocab: &Vocabulary,
    record: &CorpusRecord,
) -> Result<ScoredSentence, ScoreError> {
    let method = CompressedMethod {
        tokens: record.compressed_method_tokens.clone(),
        scheme: crate::compress::CompressionScheme::BeginEnd,
        truncated: false,
    };
    let sentence = CommentSentence {
        tokens: record.sentence_tokens.clone(),
        javadoc_tag: record.javadoc_tag.clone(),
        source_pair_id: record.pair_id.clone(),
        text: record.sentence_text.clone(),
    };
    score_pair(
        checkpoint,
        method_vocab,
        comment_vocab,
        &method,
        &sentence,
        &record.file,
        record.line,
    )
}

/// Sort ascending by perplexity (ties by pair id) and assign 1-based ranks.
pub fn rank_corpus(mut scored: Vec<ScoredSentence>) -> Vec<ScoredSentence> {
    scored.sort_by(|a, b| {
        a.perplexity
            .partial_cmp(&b.perplexity)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.pair_id.cmp(&b.pair_id))
    });
    for (i, s) in scored.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    scored
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TagReportRow {
    /// `@tag` name, or `non-javadoc` for the untagged aggregate.
    pub tag: String,
    pub sentence_count: usize,
    pub avg_perplexity: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TagReport {
    pub rows: Vec<TagReportRow>,
    /// Sentences whose tag fell below the occurrence threshold.
    pub omitted: usize,
}

/// Per-Javadoc-tag average perplexity. Tags occurring fewer than `min_count`
/// times are omitted; untagged sentences aggregate into one `non-javadoc`
/// row. Rows are ordered by descending average perplexity.
pub fn javadoc_report(scored: &[ScoredSentence], min_count: usize) -> TagReport {
    let mut groups: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    let mut untagged = (0usize, 0.0f64);
    for s in scored {
        match &s.javadoc_tag {
            Some(tag) => {
                let e = groups.entry(tag).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += s.perplexity;
            }
            None => {
                untagged.0 += 1;
                untagged.1 += s.perplexity;
            }
        }
    }
    let mut rows = Vec::new();
    let mut omitted = 0usize;
    for (tag, (count, sum)) in groups {
        if count < min_count {
            omitted += count;
            continue;
        }
        rows.push(TagReportRow {
            tag: tag.to_string(),
            sentence_count: count,
            avg_perplexity: sum / count as f64,
        });
    }
    if untagged.0 > 0 {
        rows.push(TagReportRow {
            tag: "non-javadoc".to_string(),
            sentence_count: untagged.0,
            avg_perplexity: untagged.1 / untagged.0 as f64,
        });
    }
    rows.sort_by(|a, b| {
        b.avg_perplexity
            .partial_cmp(&a.avg_perplexity)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.tag.cmp(&b.tag))
    });
    TagReport { rows, omitted }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    pub count: usize,
    pub avg: f64,
    /// Sample standard deviation; 0 for singleton categories.
    pub stdev: f64,
    /// Nearest-rank (lower) median.
    pub median: f64,
}

/// Aggregate scored sentences under externally supplied category labels.
pub fn category_report(
    scored: &[ScoredSentence],
    labels: &BTreeMap<String, String>,
) -> Result<Vec<CategoryRow>, ScoreError> {
    let by_id: BTreeMap<&str, &ScoredSentence> =
        scored.iter().map(|s| (s.pair_id.as_str(), s)).collect();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (pair_id, category) in labels {
        let s = by_id
            .get(pair_id.as_str())
            .ok_or_else(|| ScoreError::UnknownPairId(pair_id.clone()))?;
        groups.entry(category).or_default().push(s.perplexity);
    }
    let mut rows = Vec::new();
    for (category, mut pps) in groups {
        pps.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = pps.len();
        let avg = pps.iter().sum::<f64>() / n as f64;
        let stdev = if n > 1 {
            (pps.iter().map(|p| (p - avg) * (p - avg)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let median = pps[n.div_ceil(2) - 1];
        rows.push(CategoryRow {
            category: category.to_string(),
            count: n,
            avg,
            stdev,
            median,
        });
    }
    rows.sort_by(|a, b| {
        b.avg
            .partial_cmp(&a.avg)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.category.cmp(&b.category))
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{LstmParams, ModelConfig};

    #[test]
    fn perplexity_of_uniform_model_is_vocab_size() {
        let v = 25000.0f64;
        let n = 7usize;
        let lp = -(n as f64) * v.ln();
        let pp = perplexity(lp, n).unwrap();
        assert!((pp - v).abs() / v < 1e-12);
    }

    #[test]
    fn perplexity_of_certainty_is_one() {
        assert_eq!(perplexity(0.0, 3).unwrap(), 1.0);
    }

    #[test]
    fn perplexity_closed_form() {
        // P = 0.5 * 0.125 = 1/16 over 2 tokens -> pp = 4.
        let lp = (0.5f64).ln() + (0.125f64).ln();
        assert!((perplexity(lp, 2).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_length_is_error() {
        assert!(matches!(perplexity(-1.0, 0), Err(ScoreError::ZeroLength)));
        assert!(matches!(cross_entropy(-1.0, 0), Err(ScoreError::ZeroLength)));
    }

    #[test]
    fn cross_entropy_identities() {
        // pp = 16 -> xe = 4 bits
        let lp = -(16.0f64).ln() * 2.0;
        assert!((cross_entropy(lp, 2).unwrap() - 4.0).abs() < 1e-12);
        // pp = 1 -> xe = 0
        assert_eq!(cross_entropy(0.0, 5).unwrap(), 0.0);
        // pp = V -> xe = log2 V
        let v = 512.0f64;
        let lp = -v.ln() * 3.0;
        assert!((cross_entropy(lp, 3).unwrap() - 9.0).abs() < 1e-12);
    }

    fn lm_checkpoint(vocab: usize) -> ModelCheckpoint {
        ModelCheckpoint {
            kind: ModelKind::Lm,
            config: ModelConfig {
                hidden_size: 4,
                vocab_size_method: 0,
                vocab_size_comment: vocab,
                ..ModelConfig::desk(ModelKind::Lm)
            },
            encoder: None,
            decoder: LstmParams::zeros(4, vocab),
            vocab_hash_method: "-".into(),
            vocab_hash_comment: "sha256:c".into(),
            epoch: 1,
            valid_perplexity: 1.0,
        }
    }

    fn sentence(tokens: &[&str], id: &str) -> CommentSentence {
        CommentSentence {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            javadoc_tag: None,
            source_pair_id: id.to_string(),
            text: tokens.join(" "),
        }
    }

    fn compressed(tokens: &[&str]) -> CompressedMethod {
        CompressedMethod {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            scheme: crate::compress::CompressionScheme::BeginEnd,
            truncated: false,
        }
    }

    #[test]
    fn lm_scoring_ignores_method() {
        let vocab = Vocabulary::build(["returns", "the", "id"], 10).unwrap();
        let ckpt = lm_checkpoint(vocab.size());
        let s = sentence(&["returns", "the", "id"], "A.java:1#0");
        let a = score_pair(&ckpt, None, &vocab, &compressed(&["x"]), &s, "A.java", 1).unwrap();
        assert_eq!(a.n_tokens, 4); // 3 tokens + EOS
        // Metamorphic: any method yields the identical LM score.
        let mut rng = crate::rng::Rng::new(8);
        for _ in 0..5 {
            let tokens: Vec<String> = (0..rng.below(6)).map(|i| format!("m{i}")).collect();
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let b = score_pair(&ckpt, None, &vocab, &compressed(&refs), &s, "A.java", 1).unwrap();
            assert_eq!(a.perplexity.to_bits(), b.perplexity.to_bits());
        }
    }

    #[test]
    fn zero_weight_seq2seq_scores_vocab_size() {
        let mvocab = Vocabulary::build(["get", "id"], 10).unwrap();
        let cvocab = Vocabulary::build(["returns", "id"], 10).unwrap();
        let ckpt = ModelCheckpoint {
            kind: ModelKind::Seq2Seq,
            config: ModelConfig {
                hidden_size: 4,
                vocab_size_method: mvocab.size(),
                vocab_size_comment: cvocab.size(),
                ..ModelConfig::desk(ModelKind::Seq2Seq)
            },
            encoder: Some(LstmParams::zeros(4, mvocab.size())),
            decoder: LstmParams::zeros(4, cvocab.size()),
            vocab_hash_method: "sha256:m".into(),
            vocab_hash_comment: "sha256:c".into(),
            epoch: 1,
            valid_perplexity: 1.0,
        };
        let s = sentence(&["returns", "id"], "B.java:3#0");
        let scored = score_pair(
            &ckpt,
            Some(&mvocab),
            &cvocab,
            &compressed(&["get", "id"]),
            &s,
            "B.java",
            3,
        )
        .unwrap();
        let v = cvocab.size() as f64;
        assert!((scored.perplexity - v).abs() / v < 1e-9);
        assert!(!scored.empty_method);
    }

    #[test]
    fn unk_fraction_counted() {
        let vocab = Vocabulary::build(["known"], 10).unwrap();
        let ckpt = lm_checkpoint(vocab.size());
        let s = sentence(&["known", "mystery"], "C.java:9#0");
        let scored = score_pair(&ckpt, None, &vocab, &compressed(&[]), &s, "C.java", 9).unwrap();
        assert_eq!(scored.unk_fraction, 0.5);
    }

    #[test]
    fn vocab_hash_check() {
        let ckpt = lm_checkpoint(8);
        assert!(verify_vocab_hashes(&ckpt, None, "sha256:c").is_ok());
        assert!(matches!(
            verify_vocab_hashes(&ckpt, None, "sha256:other"),
            Err(ScoreError::VocabMismatch { .. })
        ));
    }

    fn scored_with(pp: f64, id: &str, tag: Option<&str>) -> ScoredSentence {
        ScoredSentence {
            pair_id: id.to_string(),
            sentence_tokens: vec!["x".into()],
            javadoc_tag: tag.map(str::to_string),
            log_prob: -pp.ln(),
            n_tokens: 1,
            perplexity: pp,
            cross_entropy_bits: pp.log2(),
            rank: 0,
            unk_fraction: 0.0,
            file: "F.java".into(),
            line: 1,
            sentence_text: "x".into(),
            empty_method: false,
        }
    }

    #[test]
    fn rank_corpus_sorts_ascending() {
        let scored = vec![
            scored_with(5.0, "a", None),
            scored_with(1.2, "b", None),
            scored_with(9.9, "c", None),
        ];
        let ranked = rank_corpus(scored);
        let pps: Vec<f64> = ranked.iter().map(|s| s.perplexity).collect();
        assert_eq!(pps, vec![1.2, 5.0, 9.9]);
        let ranks: Vec<usize> = ranked.iter().map(|s| s.rank).collect();
        assert_eq!(ranks, vec![1, 2, 3]);
    }

    #[test]
    fn rank_ties_break_by_pair_id() {
        let ranked = rank_corpus(vec![
            scored_with(2.0, "zzz", None),
            scored_with(2.0, "aaa", None),
        ]);
        assert_eq!(ranked[0].pair_id, "aaa");
        assert_eq!(ranked[1].pair_id, "zzz");
    }

    #[test]
    fn rank_is_permutation() {
        let scored: Vec<ScoredSentence> = (0..20)
            .map(|i| scored_with(1.0 + (i * 7 % 13) as f64, &format!("id{i}"), None))
            .collect();
        let ranked = rank_corpus(scored.clone());
        assert_eq!(ranked.len(), scored.len());
        for w in ranked.windows(2) {
            assert!(w[0].perplexity <= w[1].perplexity);
        }
        let mut ids: Vec<_> = ranked.iter().map(|s| s.pair_id.clone()).collect();
        ids.sort();
        let mut orig: Vec<_> = scored.iter().map(|s| s.pair_id.clone()).collect();
        orig.sort();
        assert_eq!(ids, orig);
    }

    #[test]
    fn javadoc_report_fixture() {
        let mut scored = Vec::new();
        for i in 0..10 {
            scored.push(scored_with(2.0, &format!("p{i}"), Some("@param")));
            scored.push(scored_with(4.0, &format!("r{i}"), Some("@return")));
            scored.push(scored_with(8.0, &format!("n{i}"), None));
        }
        let report = javadoc_report(&scored, 5);
        assert_eq!(report.omitted, 0);
        assert_eq!(report.rows.len(), 3);
        let row = |tag: &str| report.rows.iter().find(|r| r.tag == tag).unwrap();
        assert_eq!(row("@param").sentence_count, 10);
        assert_eq!(row("@param").avg_perplexity, 2.0);
        assert_eq!(row("@return").sentence_count, 10);
        assert_eq!(row("@return").avg_perplexity, 4.0);
        assert_eq!(row("non-javadoc").sentence_count, 10);
        assert_eq!(row("non-javadoc").avg_perplexity, 8.0);
        // Descending average order.
        assert_eq!(report.rows[0].tag, "non-javadoc");
    }

    #[test]
    fn javadoc_report_threshold_omits_rare_tags() {
        let mut scored = vec![
            scored_with(1.0, "a", Some("@rare")),
            scored_with(1.0, "b", Some("@rare")),
            scored_with(1.0, "c", Some("@rare")),
        ];
        for i in 0..30 {
            scored.push(scored_with(2.0, &format!("p{i}"), Some("@param")));
        }
        let report = javadoc_report(&scored, 25);
        assert!(report.rows.iter().all(|r| r.tag != "@rare"));
        assert_eq!(report.omitted, 3);
        let total: usize = report.rows.iter().map(|r| r.sentence_count).sum();
        assert_eq!(total + report.omitted, scored.len());
    }

    #[test]
    fn category_report_examples() {
        let scored = vec![scored_with(1.0, "a", None), scored_with(3.0, "b", None)];
        let labels: BTreeMap<String, String> = [
            ("a".to_string(), "summary".to_string()),
            ("b".to_string(), "summary".to_string()),
        ]
        .into();
        let rows = category_report(&scored, &labels).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].count, 2);
        assert_eq!(rows[0].avg, 2.0);
        assert!((rows[0].stdev - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(rows[0].median, 1.0);
    }

    #[test]
    fn category_report_empty_labels() {
        let scored = vec![scored_with(1.0, "a", None)];
        let rows = category_report(&scored, &BTreeMap::new()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn category_report_partition_counts() {
        let scored = vec![
            scored_with(1.0, "a", None),
            scored_with(2.0, "b", None),
            scored_with(3.0, "c", None),
        ];
        let labels: BTreeMap<String, String> = [
            ("a".to_string(), "x".to_string()),
            ("b".to_string(), "x".to_string()),
            ("c".to_string(), "y".to_string()),
        ]
        .into();
        let rows = category_report(&scored, &labels).unwrap();
        let total: usize = rows.iter().map(|r| r.count).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn category_report_unknown_pair_id() {
        let scored = vec![scored_with(1.0, "a", None)];
        let labels: BTreeMap<String, String> = [("missing".to_string(), "x".to_string())].into();
        assert!(matches!(
            category_report(&scored, &labels),
            Err(ScoreError::UnknownPairId(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn pp_equals_two_to_the_xe(lp in -200.0f64..0.0, n in 1usize..50) {
            let pp = perplexity(lp, n).unwrap();
            let xe = cross_entropy(lp, n).unwrap();
            let reconstructed = 2.0f64.powf(xe);
            proptest::prop_assert!((pp - reconstructed).abs() / pp.max(1e-12) < 1e-9);
        }

        #[test]
        fn perplexity_at_least_one(lp in -200.0f64..0.0, n in 1usize..50) {
            proptest::prop_assert!(perplexity(lp, n).unwrap() >= 1.0 - 1e-9);
        }
    }
}
