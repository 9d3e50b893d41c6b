//! Stage artifacts: line-delimited JSON files whose first line is a header
//! carrying the seed and content hashes of the inputs the artifact was
//! derived from. Later stages re-hash those inputs and refuse to run on a
//! mismatch unless forced.

use crate::error::CliError;
use craic_core::hash::sha256_file;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const SENTENCES_FILE: &str = "sentences.jsonl";
pub const METHOD_VOCAB_FILE: &str = "method.vocab";
pub const COMMENT_VOCAB_FILE: &str = "comment.vocab";
pub const LM_CHECKPOINT_FILE: &str = "lm.ckpt";
pub const S2S_CHECKPOINT_FILE: &str = "s2s.ckpt";
pub const RANKED_TSV_FILE: &str = "ranked.tsv";
pub const RANKED_JSONL_FILE: &str = "ranked.jsonl";

pub fn corpus_file(split: craic_core::records::Split) -> String {
    format!("corpus.{}.jsonl", split.as_str())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub craic_artifact: String,
    pub version: u32,
    pub seed: u64,
    /// Input name -> content hash at the time this artifact was written.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
    /// Method names per file (pairs artifact only); the identifier
    /// compression scheme uses these to spot locally defined calls.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub file_methods: BTreeMap<String, Vec<String>>,
}

impl ArtifactHeader {
    pub fn new(kind: &str, seed: u64) -> Self {
        ArtifactHeader {
            craic_artifact: kind.to_string(),
            version: 1,
            seed,
            ..Default::default()
        }
    }
}

/// Write header + records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: &ArtifactHeader,
    records: &[T],
) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, header).map_err(|e| malformed(path, e.to_string()))?;
    w.write_all(b"\n")?;
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(|e| malformed(path, e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
    stage: &'static str,
) -> Result<(ArtifactHeader, Vec<T>), CliError> {
    let file = std::fs::File::open(path).map_err(|_| CliError::MissingArtifact {
        path: path.to_path_buf(),
        stage,
    })?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| malformed(path, "empty file".to_string()))??;
    let header: ArtifactHeader =
        serde_json::from_str(&header_line).map_err(|e| malformed(path, e.to_string()))?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| malformed(path, e.to_string()))?);
    }
    Ok((header, records))
}

fn malformed(path: &Path, message: String) -> CliError {
    CliError::MalformedArtifact {
        path: path.to_path_buf(),
        message,
    }
}

/// Check one recorded input hash against the file on disk. Inputs that have
/// since disappeared are ignored: a stage only needs its direct inputs.
pub fn verify_recorded_hash(
    artifact: &str,
    header: &ArtifactHeader,
    input_name: &str,
    input_path: &Path,
    force: bool,
) -> Result<(), CliError> {
    if force || !input_path.exists() {
        return Ok(());
    }
    let Some(recorded) = header.inputs.get(input_name) else {
        return Ok(());
    };
    let actual = sha256_file(input_path)?;
    if &actual != recorded {
        return Err(CliError::HashMismatch {
            artifact: artifact.to_string(),
            input: input_name.to_string(),
            recorded: recorded.clone(),
            actual,
        });
    }
    Ok(())
}

/// Stable hash of an input tree: per-file digests over sorted relative
/// paths, hashed together.
pub fn hash_input_tree(files: &[(String, PathBuf)]) -> Result<String, CliError> {
    let mut manifest = String::new();
    for (name, path) in files {
        manifest.push_str(name);
        manifest.push('\0');
        manifest.push_str(&sha256_file(path)?);
        manifest.push('\n');
    }
    Ok(craic_core::hash::sha256_hex(manifest.as_bytes()))
}

/// Resolve the input argument into `(file_id, path)` pairs: either every
/// `.java` file under a directory (sorted by relative path) or the lines of
/// a manifest file (resolved against the manifest's directory).
pub fn collect_input_files(input: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    if input.is_dir() {
        let mut files = Vec::new();
        walk_java_files(input, input, &mut files)?;
        files.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(files)
    } else if input.is_file() {
        let text = std::fs::read_to_string(input)?;
        let base = input.parent().unwrap_or(Path::new("."));
        let mut files = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let path = if Path::new(line).is_absolute() {
                PathBuf::from(line)
            } else {
                base.join(line)
            };
            if !path.is_file() {
                return Err(CliError::ConfigInvalid(format!(
                    "manifest entry `{line}` does not exist"
                )));
            }
            files.push((line.to_string(), path));
        }
        Ok(files)
    } else {
        Err(CliError::ConfigInvalid(format!(
            "input `{}` is neither a directory nor a manifest file",
            input.display()
        )))
    }
}

fn walk_java_files(
    root: &Path,
    dir: &Path,
    out: &mut Vec<(String, PathBuf)>,
) -> Result<(), CliError> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            walk_java_files(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "java") {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .replace('\\', "/");
            out.push((rel, path));
        }
    }
    Ok(())
}

/// Resolve a recorded file id back to a path on disk, for commands that
/// need to reopen original sources.
pub fn resolve_file_id(input: &Path, file_id: &str) -> PathBuf {
    let as_path = Path::new(file_id);
    if as_path.is_absolute() {
        return as_path.to_path_buf();
    }
    if input.is_dir() {
        input.join(as_path)
    } else {
        input.parent().unwrap_or(Path::new(".")).join(as_path)
    }
}
