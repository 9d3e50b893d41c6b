//! `craic extract`: mine method/comment pairs and their sentences from a
//! Java source tree (or a manifest of files) into the work directory.

use crate::artifacts::{
    collect_input_files, hash_input_tree, write_jsonl, ArtifactHeader, PAIRS_FILE, SENTENCES_FILE,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::lock::WorkLock;
use craic_core::extract::{lex_java, mine_pairs};
use craic_core::hash::sha256_file;
use craic_core::records::{PairRecord, SentenceRecord};
use craic_core::textprep::build_pairs;

pub fn cmd_extract(config: &PipelineConfig) -> Result<String, CliError> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| CliError::ConfigInvalid("no input path given (--input or config)".into()))?;
    if !input.exists() {
        return Err(CliError::ConfigInvalid(format!(
            "input `{}` does not exist",
            input.display()
        )));
    }
    let _lock = WorkLock::acquire(&config.work)?;

    let files = collect_input_files(input)?;
    let tree_hash = hash_input_tree(&files)?;

    let mut pair_records = Vec::new();
    let mut file_methods = std::collections::BTreeMap::new();
    let mut diagnostics = 0usize;
    for (file_id, path) in &files {
        let bytes = std::fs::read(path)?;
        let source = String::from_utf8_lossy(&bytes);
        let lexed = lex_java(&source);
        diagnostics += lexed.diagnostics.len();
        let mined = mine_pairs(&lexed.tokens, file_id);
        diagnostics += mined.issues.len();
        if !mined.method_names.is_empty() {
            file_methods.insert(
                file_id.clone(),
                mined.method_names.iter().cloned().collect::<Vec<_>>(),
            );
        }
        for pair in &mined.pairs {
            pair_records.push((PairRecord::from_pair(pair), build_pairs(pair)));
        }
    }
    pair_records.sort_by(|a, b| (&a.0.file, a.0.line).cmp(&(&b.0.file, b.0.line)));

    let mut header = ArtifactHeader::new("pairs", config.seed);
    header.inputs.insert("input".into(), tree_hash.clone());
    header.file_methods = file_methods;
    let pairs_only: Vec<&PairRecord> = pair_records.iter().map(|(p, _)| p).collect();
    let pairs_path = config.work.join(PAIRS_FILE);
    write_jsonl(&pairs_path, &header, &pairs_only)?;

    let mut sentence_records = Vec::new();
    for (record, pairs) in &pair_records {
        for pair in pairs {
            sentence_records.push(SentenceRecord::from_pair(record, pair));
        }
    }
    let mut sentences_header = ArtifactHeader::new("sentences", config.seed);
    sentences_header.inputs.insert("input".into(), tree_hash);
    sentences_header
        .inputs
        .insert(PAIRS_FILE.into(), sha256_file(&pairs_path)?);
    write_jsonl(
        &config.work.join(SENTENCES_FILE),
        &sentences_header,
        &sentence_records,
    )?;

    Ok(format!(
        "extracted {} method-comment pairs ({} sentences) from {} files ({} diagnostics)",
        pair_records.len(),
        sentence_records.len(),
        files.len(),
        diagnostics
    ))
}
