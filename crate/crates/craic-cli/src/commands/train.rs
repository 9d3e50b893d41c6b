//! `craic train --model {lm|s2s}`: train a model on the prepared corpus and
//! write its checkpoint. Prints a per-epoch train/valid perplexity table and
//! a final summary row with the test perplexity of the best checkpoint.

use crate::artifacts::{
    corpus_file, read_jsonl, verify_recorded_hash, COMMENT_VOCAB_FILE, LM_CHECKPOINT_FILE,
    METHOD_VOCAB_FILE, PAIRS_FILE, S2S_CHECKPOINT_FILE,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::lock::WorkLock;
use craic_core::hash::sha256_file;
use craic_core::neural::{
    corpus_lm_perplexity, corpus_seq2seq_perplexity, train_lm, train_seq2seq, ModelCheckpoint,
    ModelKind, TrainResult,
};
use craic_core::records::{CorpusRecord, Split};
use craic_core::vocab::{Vocabulary, BOS, EOS};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Default)]
pub struct TrainOptions {
    pub force: bool,
    pub resume: Option<PathBuf>,
}

pub fn cmd_train(
    config: &PipelineConfig,
    kind: ModelKind,
    options: &TrainOptions,
) -> Result<String, CliError> {
    let _lock = WorkLock::acquire(&config.work)?;
    let pairs_path = config.work.join(PAIRS_FILE);
    let mut corpora = Vec::new();
    let mut compression = config.compression.to_string();
    for split in [Split::Train, Split::Valid, Split::Test] {
        let path = config.work.join(corpus_file(split));
        let (header, records): (_, Vec<CorpusRecord>) = read_jsonl(&path, "prep")?;
        verify_recorded_hash(
            &corpus_file(split),
            &header,
            PAIRS_FILE,
            &pairs_path,
            options.force,
        )?;
        if let Some(scheme) = header.meta.get("compression") {
            compression = scheme.clone();
        }
        corpora.push(records);
    }
    let test = corpora.pop().expect("three corpora");
    let valid = corpora.pop().expect("two corpora");
    let train = corpora.pop().expect("one corpus");

    let comment_vocab_path = config.work.join(COMMENT_VOCAB_FILE);
    let comment_vocab =
        Vocabulary::from_file(&comment_vocab_path).map_err(|_| CliError::MissingArtifact {
            path: comment_vocab_path.clone(),
            stage: "prep",
        })?;
    let comment_hash = sha256_file(&comment_vocab_path)?;

    let resume = match &options.resume {
        Some(path) => Some(ModelCheckpoint::from_file(path)?),
        None => None,
    };

    let mut model_config = config.model_config(kind);
    model_config.vocab_size_comment = comment_vocab.size();

    let encode_sentences = |records: &[CorpusRecord]| -> Vec<Vec<u32>> {
        records
            .iter()
            .map(|r| comment_vocab.encode(&r.sentence_tokens, false))
            .collect()
    };

    let (result, checkpoint_path): (TrainResult, PathBuf) = match kind {
        ModelKind::Lm => {
            model_config.vocab_size_method = 0;
            let result = train_lm(
                &encode_sentences(&train),
                &encode_sentences(&valid),
                &model_config,
                &comment_hash,
                resume.as_ref(),
            )?;
            (result, config.work.join(LM_CHECKPOINT_FILE))
        }
        ModelKind::Seq2Seq => {
            let method_vocab_path = config.work.join(METHOD_VOCAB_FILE);
            let method_vocab = Vocabulary::from_file(&method_vocab_path).map_err(|_| {
                CliError::MissingArtifact {
                    path: method_vocab_path.clone(),
                    stage: "prep",
                }
            })?;
            let method_hash = sha256_file(&method_vocab_path)?;
            model_config.vocab_size_method = method_vocab.size();
            let encode_pairs = |records: &[CorpusRecord]| -> Vec<(Vec<u32>, Vec<u32>)> {
                records
                    .iter()
                    .map(|r| {
                        (
                            method_vocab.encode(&r.compressed_method_tokens, false),
                            comment_vocab.encode(&r.sentence_tokens, false),
                        )
                    })
                    .collect()
            };
            let result = train_seq2seq(
                &encode_pairs(&train),
                &encode_pairs(&valid),
                &model_config,
                &method_hash,
                &comment_hash,
                resume.as_ref(),
            )?;
            (result, config.work.join(S2S_CHECKPOINT_FILE))
        }
    };

    result.checkpoint.to_file(&checkpoint_path)?;

    // Test perplexity of the best checkpoint.
    let test_pp = match kind {
        ModelKind::Lm => {
            let sentences = encode_sentences(&test);
            corpus_lm_perplexity(&result.checkpoint.decoder, &sentences, BOS, EOS)?
        }
        ModelKind::Seq2Seq => {
            let method_vocab = Vocabulary::from_file(&config.work.join(METHOD_VOCAB_FILE))?;
            let pairs: Vec<(Vec<u32>, Vec<u32>)> = test
                .iter()
                .map(|r| {
                    (
                        method_vocab.encode(&r.compressed_method_tokens, false),
                        comment_vocab.encode(&r.sentence_tokens, false),
                    )
                })
                .collect();
            let encoder = result.checkpoint.encoder.as_ref().expect("seq2seq encoder");
            corpus_seq2seq_perplexity(encoder, &result.checkpoint.decoder, &pairs, BOS, EOS)?
        }
    };

    let mut table = String::new();
    writeln!(table, "epoch\ttrain\tvalid\tlr").unwrap();
    for p in &result.history {
        writeln!(
            table,
            "{}\t{:.2}\t{:.2}\t{:.4}",
            p.epoch, p.train_perplexity, p.valid_perplexity, p.learning_rate
        )
        .unwrap();
    }
    writeln!(table, "model\ttrain\tvalid\ttest").unwrap();
    let best_train = result
        .history
        .iter()
        .find(|p| p.epoch == result.checkpoint.epoch)
        .map(|p| p.train_perplexity)
        .unwrap_or(f64::NAN);
    let model_name = match kind {
        ModelKind::Lm => "lm".to_string(),
        ModelKind::Seq2Seq => format!("s2s-{compression}"),
    };
    write!(
        table,
        "{model_name}\t{:.2}\t{:.2}\t{test_pp:.2}",
        best_train, result.checkpoint.valid_perplexity
    )
    .unwrap();
    Ok(table)
}
