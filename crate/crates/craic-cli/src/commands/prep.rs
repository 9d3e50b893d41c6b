//! `craic prep`: compress methods, truncate comments, split the corpus and
//! build the two vocabularies.

use crate::artifacts::{
    corpus_file, read_jsonl, verify_recorded_hash, write_jsonl, ArtifactHeader,
    COMMENT_VOCAB_FILE, METHOD_VOCAB_FILE, PAIRS_FILE, SENTENCES_FILE,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::lock::WorkLock;
use craic_core::compress::{compress, truncate_comment};
use craic_core::hash::sha256_file;
use craic_core::records::{CorpusRecord, PairRecord, SentenceRecord, Split};
use craic_core::textprep::split_corpus;
use craic_core::vocab::Vocabulary;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Default)]
pub struct PrepOptions {
    pub force: bool,
}

pub fn cmd_prep(config: &PipelineConfig, options: &PrepOptions) -> Result<String, CliError> {
    let _lock = WorkLock::acquire(&config.work)?;
    let pairs_path = config.work.join(PAIRS_FILE);
    let sentences_path = config.work.join(SENTENCES_FILE);
    let (pairs_header, pair_records): (_, Vec<PairRecord>) =
        read_jsonl(&pairs_path, "extract")?;
    let (sentences_header, sentence_records): (_, Vec<SentenceRecord>) =
        read_jsonl(&sentences_path, "extract")?;
    verify_recorded_hash(
        SENTENCES_FILE,
        &sentences_header,
        PAIRS_FILE,
        &pairs_path,
        options.force,
    )?;

    // Compress each mined method once, then attach to its sentences.
    let empty = Vec::new();
    let mut compressed_of: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for record in &pair_records {
        let local_methods: BTreeSet<String> = pairs_header
            .file_methods
            .get(&record.file)
            .unwrap_or(&empty)
            .iter()
            .cloned()
            .collect();
        let compressed = compress(
            config.compression,
            &record.signature_tokens,
            &record.body_tokens,
            &local_methods,
            config.max_tokens,
        );
        compressed_of.insert(record.pair_id(), compressed.tokens);
    }

    let mut units: Vec<CorpusRecord> = Vec::with_capacity(sentence_records.len());
    for s in &sentence_records {
        let base = s
            .pair_id
            .split_once('#')
            .map(|(b, _)| b.to_string())
            .unwrap_or_else(|| s.pair_id.clone());
        let Some(compressed) = compressed_of.get(&base) else {
            return Err(CliError::MalformedArtifact {
                path: sentences_path.clone(),
                message: format!("sentence {} has no pair record {base}", s.pair_id),
            });
        };
        units.push(CorpusRecord {
            pair_id: s.pair_id.clone(),
            file: s.file.clone(),
            line: s.line,
            method_tokens: s.method_tokens.clone(),
            compressed_method_tokens: compressed.clone(),
            sentence_text: s.sentence_text.clone(),
            sentence_tokens: truncate_comment(&s.sentence_tokens, config.max_tokens),
            javadoc_tag: s.javadoc_tag.clone(),
            split: Split::Train, // reassigned below
        });
    }

    let (train_n, valid_n, test_n) = config.split_sizes(units.len())?;
    let (mut train, mut valid, mut test) =
        split_corpus(units, train_n, valid_n, test_n, config.seed)?;
    for r in &mut train {
        r.split = Split::Train;
    }
    for r in &mut valid {
        r.split = Split::Valid;
    }
    for r in &mut test {
        r.split = Split::Test;
    }

    let method_vocab = Vocabulary::build(
        train
            .iter()
            .flat_map(|r| r.compressed_method_tokens.iter().map(String::as_str)),
        config.vocab_size,
    )?;
    let comment_vocab = Vocabulary::build(
        train
            .iter()
            .flat_map(|r| r.sentence_tokens.iter().map(String::as_str)),
        config.vocab_size,
    )?;
    method_vocab.to_file(&config.work.join(METHOD_VOCAB_FILE))?;
    comment_vocab.to_file(&config.work.join(COMMENT_VOCAB_FILE))?;

    let pairs_hash = sha256_file(&pairs_path)?;
    let sentences_hash = sha256_file(&sentences_path)?;
    for (records, split) in [
        (&train, Split::Train),
        (&valid, Split::Valid),
        (&test, Split::Test),
    ] {
        let mut header = ArtifactHeader::new("corpus", config.seed);
        header.inputs.insert(PAIRS_FILE.into(), pairs_hash.clone());
        header
            .inputs
            .insert(SENTENCES_FILE.into(), sentences_hash.clone());
        header
            .meta
            .insert("compression".into(), config.compression.to_string());
        header
            .meta
            .insert("max_tokens".into(), config.max_tokens.to_string());
        header
            .meta
            .insert("vocab_size".into(), config.vocab_size.to_string());
        header.meta.insert("split".into(), split.as_str().into());
        write_jsonl(&config.work.join(corpus_file(split)), &header, records)?;
    }

    Ok(format!(
        "prepared {}/{}/{} train/valid/test sentences ({} compression, L={}); vocabularies: method {}, comment {}",
        train.len(),
        valid.len(),
        test.len(),
        config.compression,
        config.max_tokens,
        method_vocab.size(),
        comment_vocab.size()
    ))
}
