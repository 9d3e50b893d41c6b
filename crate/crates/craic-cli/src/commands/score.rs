//! `craic score`: score comment sentences with a trained checkpoint, write
//! the ranked report (TSV + JSONL), and optionally emit stripped copies of
//! the sources with the most redundant sentences removed.

use crate::artifacts::{
    corpus_file, read_jsonl, resolve_file_id, verify_recorded_hash, write_jsonl, ArtifactHeader,
    COMMENT_VOCAB_FILE, LM_CHECKPOINT_FILE, METHOD_VOCAB_FILE, PAIRS_FILE, RANKED_JSONL_FILE,
    RANKED_TSV_FILE, S2S_CHECKPOINT_FILE,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::lock::WorkLock;
use craic_core::hash::sha256_file;
use craic_core::neural::{ModelCheckpoint, ModelKind};
use craic_core::records::{CorpusRecord, PairRecord, Split};
use craic_core::score::{rank_corpus, score_record, verify_vocab_hashes, ScoredSentence};
use craic_core::vocab::Vocabulary;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitSelect {
    One(Split),
    All,
}

impl std::str::FromStr for SplitSelect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitSelect::One(Split::Train)),
            "valid" => Ok(SplitSelect::One(Split::Valid)),
            "test" => Ok(SplitSelect::One(Split::Test)),
            "all" => Ok(SplitSelect::All),
            other => Err(format!(
                "unknown split `{other}` (expected train|valid|test|all)"
            )),
        }
    }
}

#[derive(Debug)]
pub struct ScoreOptions {
    pub kind: ModelKind,
    pub checkpoint: Option<PathBuf>,
    pub split: SplitSelect,
    pub force: bool,
    /// Remove sentences with perplexity below this threshold from copies of
    /// the sources.
    pub strip_threshold: Option<f64>,
    pub strip_out: Option<PathBuf>,
}

pub fn cmd_score(config: &PipelineConfig, options: &ScoreOptions) -> Result<String, CliError> {
    let _lock = WorkLock::acquire(&config.work)?;
    let checkpoint_path = options.checkpoint.clone().unwrap_or_else(|| {
        config.work.join(match options.kind {
            ModelKind::Lm => LM_CHECKPOINT_FILE,
            ModelKind::Seq2Seq => S2S_CHECKPOINT_FILE,
        })
    });
    if !checkpoint_path.exists() {
        return Err(CliError::MissingArtifact {
            path: checkpoint_path,
            stage: "train",
        });
    }
    let checkpoint = ModelCheckpoint::from_file(&checkpoint_path)?;

    let comment_vocab_path = config.work.join(COMMENT_VOCAB_FILE);
    let comment_vocab =
        Vocabulary::from_file(&comment_vocab_path).map_err(|_| CliError::MissingArtifact {
            path: comment_vocab_path.clone(),
            stage: "prep",
        })?;
    let comment_hash = sha256_file(&comment_vocab_path)?;
    let (method_vocab, method_hash) = match checkpoint.kind {
        ModelKind::Seq2Seq => {
            let path = config.work.join(METHOD_VOCAB_FILE);
            let vocab = Vocabulary::from_file(&path).map_err(|_| CliError::MissingArtifact {
                path: path.clone(),
                stage: "prep",
            })?;
            let hash = sha256_file(&path)?;
            (Some(vocab), Some(hash))
        }
        ModelKind::Lm => (None, None),
    };
    verify_vocab_hashes(&checkpoint, method_hash.as_deref(), &comment_hash)?;

    let splits: Vec<Split> = match options.split {
        SplitSelect::One(split) => vec![split],
        SplitSelect::All => vec![Split::Train, Split::Valid, Split::Test],
    };
    let pairs_path = config.work.join(PAIRS_FILE);
    let mut records: Vec<CorpusRecord> = Vec::new();
    for split in splits {
        let path = config.work.join(corpus_file(split));
        let (header, mut rows): (_, Vec<CorpusRecord>) = read_jsonl(&path, "prep")?;
        verify_recorded_hash(
            &corpus_file(split),
            &header,
            PAIRS_FILE,
            &pairs_path,
            options.force,
        )?;
        records.append(&mut rows);
    }

    let mut scored = Vec::with_capacity(records.len());
    for record in &records {
        scored.push(score_record(
            &checkpoint,
            method_vocab.as_ref(),
            &comment_vocab,
            record,
        )?);
    }
    let ranked = rank_corpus(scored);

    let tsv_path = config.work.join(RANKED_TSV_FILE);
    std::fs::write(&tsv_path, ranked_tsv(&ranked))?;
    let mut header = ArtifactHeader::new("ranked", config.seed);
    header
        .inputs
        .insert("checkpoint".into(), sha256_file(&checkpoint_path)?);
    header
        .meta
        .insert("model".into(), checkpoint.kind.as_str().into());
    write_jsonl(&config.work.join(RANKED_JSONL_FILE), &header, &ranked)?;

    let mut summary = format!(
        "scored {} sentences with the {} model; ranked report at {}",
        ranked.len(),
        checkpoint.kind.as_str(),
        tsv_path.display()
    );

    if let Some(threshold) = options.strip_threshold {
        let out_dir = options
            .strip_out
            .clone()
            .unwrap_or_else(|| config.work.join("stripped"));
        let stripped = strip_sources(config, &ranked, threshold, &out_dir)?;
        write!(
            summary,
            "; stripped {stripped} sentences below perplexity {threshold} into {}",
            out_dir.display()
        )
        .unwrap();
    }
    Ok(summary)
}

fn ranked_tsv(ranked: &[ScoredSentence]) -> String {
    let mut out = String::new();
    out.push_str("rank\tperplexity\tcross_entropy_bits\tunk_fraction\tjavadoc_tag\tfile\tline\tsentence_text\n");
    for s in ranked {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.3}\t{}\t{}\t{}\t{}",
            s.rank,
            s.perplexity,
            s.cross_entropy_bits,
            s.unk_fraction,
            s.javadoc_tag.as_deref().unwrap_or(""),
            s.file,
            s.line,
            s.sentence_text.replace('\t', " ")
        )
        .unwrap();
    }
    out
}

/// Remove scored sentences below the threshold from copies of the original
/// sources. Files are never modified in place.
fn strip_sources(
    config: &PipelineConfig,
    ranked: &[ScoredSentence],
    threshold: f64,
    out_dir: &Path,
) -> Result<usize, CliError> {
    let input = config.input.as_ref().ok_or_else(|| {
        CliError::ConfigInvalid("strip mode needs the input path to reopen sources".into())
    })?;
    let (_, pair_records): (_, Vec<PairRecord>) =
        read_jsonl(&config.work.join(PAIRS_FILE), "extract")?;
    let pair_by_id: BTreeMap<String, &PairRecord> = pair_records
        .iter()
        .map(|p| (p.pair_id(), p))
        .collect();

    // Group doomed sentences by file.
    let mut by_file: BTreeMap<&str, Vec<&ScoredSentence>> = BTreeMap::new();
    for s in ranked.iter().filter(|s| s.perplexity < threshold) {
        by_file.entry(s.file.as_str()).or_default().push(s);
    }

    let mut removed = 0usize;
    for (file_id, sentences) in by_file {
        let source_path = resolve_file_id(input, file_id);
        let Ok(mut source) = std::fs::read_to_string(&source_path) else {
            continue;
        };
        // Collect spans to delete, then delete back to front.
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for s in &sentences {
            let base = s
                .pair_id
                .split_once('#')
                .map(|(b, _)| b)
                .unwrap_or(&s.pair_id);
            let Some(pair) = pair_by_id.get(base) else {
                continue;
            };
            if let Some(span) = comment_span_before_line(&source, pair.line) {
                if let Some((from, to)) =
                    find_sentence_span(&source[span.0..span.1], &s.sentence_text)
                {
                    spans.push((span.0 + from, span.0 + to));
                }
            }
        }
        spans.sort();
        spans.dedup();
        removed += spans.len();
        for &(from, to) in spans.iter().rev() {
            source.replace_range(from..to, "");
        }
        source = remove_empty_comments(&source);
        let out_path = out_dir.join(file_id);
        if let Some(parent) = out_path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(out_path, source)?;
    }
    Ok(removed)
}

/// Byte span of the block comment that ends nearest above `method_line`
/// (1-based).
fn comment_span_before_line(source: &str, method_line: u32) -> Option<(usize, usize)> {
    // Byte offset of the method line's start.
    let mut offset = 0usize;
    for (i, line) in source.split_inclusive('\n').enumerate() {
        if i + 1 == method_line as usize {
            break;
        }
        offset += line.len();
    }
    let before = &source[..offset];
    let close = before.rfind("*/")?;
    let open = before[..close].rfind("/*")?;
    Some((open, close + 2))
}

/// Find a whitespace-normalized sentence inside a comment region, tolerating
/// `*` gutters after newlines.
fn find_sentence_span(region: &str, sentence: &str) -> Option<(usize, usize)> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    let mut search_from = 0usize;
    while let Some(found) = region[search_from..].find(words[0]) {
        let start = search_from + found;
        if let Some(end) = match_words_from(region, start, &words) {
            return Some((start, end));
        }
        search_from = start + 1;
    }
    None
}

fn match_words_from(region: &str, start: usize, words: &[&str]) -> Option<usize> {
    let mut pos = start;
    for (i, word) in words.iter().enumerate() {
        if i > 0 {
            pos = skip_gutter(region, pos)?;
        }
        if region[pos..].starts_with(word) {
            pos += word.len();
        } else {
            return None;
        }
    }
    Some(pos)
}

/// Skip whitespace, and a single `*` gutter after a newline.
fn skip_gutter(region: &str, mut pos: usize) -> Option<usize> {
    let bytes = region.as_bytes();
    let mut crossed_newline = false;
    let mut moved = false;
    while pos < bytes.len() {
        let c = bytes[pos] as char;
        if c.is_whitespace() {
            crossed_newline |= c == '\n';
            pos += 1;
            moved = true;
        } else if c == '*' && crossed_newline && !region[pos..].starts_with("*/") {
            pos += 1;
            crossed_newline = false;
            moved = true;
        } else {
            break;
        }
    }
    moved.then_some(pos)
}

/// Drop block comments whose interior lost all its text.
fn remove_empty_comments(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let mut rest = source;
    while let Some(open) = rest.find("/*") {
        let Some(close_rel) = rest[open..].find("*/") else {
            break;
        };
        let close = open + close_rel + 2;
        let interior = &rest[open + 2..close - 2];
        let empty = interior
            .chars()
            .all(|c| c.is_whitespace() || c == '*');
        out.push_str(&rest[..open]);
        if !empty {
            out.push_str(&rest[open..close]);
        } else {
            // Also swallow the indentation and newline the comment sat on.
            while out.ends_with(' ') || out.ends_with('\t') {
                out.pop();
            }
            if rest[close..].starts_with('\n') {
                rest = &rest[close + 1..];
                continue;
            }
        }
        rest = &rest[close..];
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_span_with_gutters() {
        let region = "/**\n * Return the current registration id.\n * @return the id\n */";
        let (from, to) = find_sentence_span(region, "Return the current registration id.").unwrap();
        assert_eq!(&region[from..to], "Return the current registration id.");
    }

    #[test]
    fn sentence_span_across_gutter_lines() {
        let region = "/* Sets the value\n * across two lines. */";
        let (from, to) = find_sentence_span(region, "Sets the value across two lines.").unwrap();
        assert!(region[from..to].starts_with("Sets the value"));
        assert!(region[from..to].ends_with("lines."));
    }

    #[test]
    fn comment_span_lookup() {
        let source = "class A {\n/* doc */\nvoid f() { }\n}\n";
        let (from, to) = comment_span_before_line(source, 3).unwrap();
        assert_eq!(&source[from..to], "/* doc */");
    }

    #[test]
    fn empty_comment_removal() {
        let cleaned = remove_empty_comments("a\n  /*   */\nb /* keep */ c\n");
        assert!(!cleaned.contains("/*   */"));
        assert!(cleaned.contains("/* keep */"));
    }

    #[test]
    fn split_select_parses() {
        assert_eq!(
            "test".parse::<SplitSelect>().unwrap(),
            SplitSelect::One(Split::Test)
        );
        assert_eq!("all".parse::<SplitSelect>().unwrap(), SplitSelect::All);
        assert!("everything".parse::<SplitSelect>().is_err());
    }
}
