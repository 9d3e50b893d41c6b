//! Checkpoint serialization.
//!
//! Layout: a `CRAIC1` magic line, `key=value` header lines (kind, config,
//! vocab hashes, epoch, validation perplexity), a `params` separator, then
//! named parameter blocks. Each block is a `name rows cols` line followed by
//! rows*cols little-endian f32 values. Writing is bitwise deterministic.

use super::lstm::LstmParams;
use super::math::Mat;
use super::{ModelConfig, ModelKind};
use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &str = "CRAIC1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub kind: ModelKind,
    pub config: ModelConfig,
    /// Present iff `kind` is `Seq2Seq`.
    pub encoder: Option<LstmParams<f32>>,
    pub decoder: LstmParams<f32>,
    pub vocab_hash_method: String,
    pub vocab_hash_comment: String,
    pub epoch: usize,
    pub valid_perplexity: f64,
}

impl ModelCheckpoint {
    pub fn write_to<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind={}", self.kind.as_str())?;
        let c = &self.config;
        writeln!(w, "hidden_size={}", c.hidden_size)?;
        writeln!(w, "vocab_size_method={}", c.vocab_size_method)?;
        writeln!(w, "vocab_size_comment={}", c.vocab_size_comment)?;
        writeln!(w, "learning_rate={}", c.learning_rate)?;
        writeln!(w, "decay_factor={}", c.decay_factor)?;
        writeln!(w, "batch_size={}", c.batch_size)?;
        writeln!(w, "dropout_keep={}", c.dropout_keep)?;
        writeln!(w, "clip_norm={}", c.clip_norm)?;
        writeln!(w, "tbptt_steps={}", c.tbptt_steps)?;
        writeln!(w, "max_epochs={}", c.max_epochs)?;
        writeln!(w, "seed={}", c.seed)?;
        writeln!(w, "vocab_hash_method={}", self.vocab_hash_method)?;
        writeln!(w, "vocab_hash_comment={}", self.vocab_hash_comment)?;
        writeln!(w, "epoch={}", self.epoch)?;
        writeln!(w, "valid_perplexity={}", self.valid_perplexity)?;
        writeln!(w, "params")?;
        if let Some(encoder) = &self.encoder {
            write_params(&mut w, "encoder", encoder)?;
        }
        write_params(&mut w, "decoder", &self.decoder)?;
        w.flush()
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(reader);
        let magic = read_line(&mut r)?;
        if magic != MAGIC {
            return Err(CheckpointError::Malformed(format!(
                "bad magic `{magic}`"
            )));
        }
        let mut fields: HashMap<String, String> = HashMap::new();
        loop {
            let line = read_line(&mut r)?;
            if line == "params" {
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CheckpointError::Malformed(format!("bad header line `{line}`")))?;
            fields.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| -> Result<&String, CheckpointError> {
            fields
                .get(key)
                .ok_or_else(|| CheckpointError::Malformed(format!("missing header `{key}`")))
        };
        fn parse<T: std::str::FromStr>(v: &str, key: &str) -> Result<T, CheckpointError> {
            v.parse()
                .map_err(|_| CheckpointError::Malformed(format!("bad value for `{key}`: {v}")))
        }
        let kind = match get("kind")?.as_str() {
            "lm" => ModelKind::Lm,
            "seq2seq" => ModelKind::Seq2Seq,
            other => {
                return Err(CheckpointError::Malformed(format!("unknown kind `{other}`")))
            }
        };
        let config = ModelConfig {
            hidden_size: parse(get("hidden_size")?, "hidden_size")?,
            vocab_size_method: parse(get("vocab_size_method")?, "vocab_size_method")?,
            vocab_size_comment: parse(get("vocab_size_comment")?, "vocab_size_comment")?,
            learning_rate: parse(get("learning_rate")?, "learning_rate")?,
            decay_factor: parse(get("decay_factor")?, "decay_factor")?,
            batch_size: parse(get("batch_size")?, "batch_size")?,
            dropout_keep: parse(get("dropout_keep")?, "dropout_keep")?,
            clip_norm: parse(get("clip_norm")?, "clip_norm")?,
            tbptt_steps: parse(get("tbptt_steps")?, "tbptt_steps")?,
            max_epochs: parse(get("max_epochs")?, "max_epochs")?,
            seed: parse(get("seed")?, "seed")?,
        };
        let mut blocks = read_blocks(&mut r)?;
        let decoder = take_params(&mut blocks, "decoder")?;
        let encoder = match kind {
            ModelKind::Seq2Seq => Some(take_params(&mut blocks, "encoder")?),
            ModelKind::Lm => None,
        };
        Ok(ModelCheckpoint {
            kind,
            config,
            encoder,
            decoder,
            vocab_hash_method: get("vocab_hash_method")?.clone(),
            vocab_hash_comment: get("vocab_hash_comment")?.clone(),
            epoch: parse(get("epoch")?, "epoch")?,
            valid_perplexity: parse(get("valid_perplexity")?, "valid_perplexity")?,
        })
    }

    pub fn to_file(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(file)
    }

    pub fn from_file(path: &Path) -> Result<Self, CheckpointError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn write_params<W: Write>(w: &mut W, prefix: &str, p: &LstmParams<f32>) -> std::io::Result<()> {
    let blocks: Vec<(&str, usize, usize, &[f32])> = vec![
        ("embed", p.vocab, p.hidden, &p.embed.data),
        ("w_input", 2 * p.hidden, p.hidden, &p.w_input.data),
        ("w_forget", 2 * p.hidden, p.hidden, &p.w_forget.data),
        ("w_output", 2 * p.hidden, p.hidden, &p.w_output.data),
        ("w_cell", 2 * p.hidden, p.hidden, &p.w_cell.data),
        ("b_input", 1, p.hidden, &p.b_input),
        ("b_forget", 1, p.hidden, &p.b_forget),
        ("b_output", 1, p.hidden, &p.b_output),
        ("b_cell", 1, p.hidden, &p.b_cell),
        ("w_proj", p.hidden, p.vocab, &p.w_proj.data),
        ("b_proj", 1, p.vocab, &p.b_proj),
    ];
    for (name, rows, cols, data) in blocks {
        writeln!(w, "{prefix}.{name} {rows} {cols}")?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_line<R: Read>(r: &mut BufReader<R>) -> Result<String, CheckpointError> {
    let mut bytes = Vec::new();
    let mut one = [0u8; 1];
    loop {
        match r.read(&mut one)? {
            0 => {
                if bytes.is_empty() {
                    return Err(CheckpointError::Malformed("unexpected end of file".into()));
                }
                break;
            }
            _ => {
                if one[0] == b'\n' {
                    break;
                }
                bytes.push(one[0]);
            }
        }
    }
    String::from_utf8(bytes).map_err(|_| CheckpointError::Malformed("non-utf8 header".into()))
}

type Blocks = HashMap<String, Mat<f32>>;

fn read_blocks<R: Read>(r: &mut BufReader<R>) -> Result<Blocks, CheckpointError> {
    let mut blocks = Blocks::new();
    loop {
        let header = {
            let mut bytes = Vec::new();
            let mut one = [0u8; 1];
            loop {
                match r.read(&mut one)? {
                    0 => break,
                    _ if one[0] == b'\n' => break,
                    _ => bytes.push(one[0]),
                }
            }
            if bytes.is_empty() {
                break;
            }
            String::from_utf8(bytes)
                .map_err(|_| CheckpointError::Malformed("non-utf8 block header".into()))?
        };
        let mut parts = header.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| CheckpointError::Malformed("empty block header".into()))?
            .to_string();
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CheckpointError::Malformed(format!("bad block header `{header}`")))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CheckpointError::Malformed(format!("bad block header `{header}`")))?;
        let mut raw = vec![0u8; rows * cols * 4];
        r.read_exact(&mut raw)
            .map_err(|_| CheckpointError::Malformed(format!("truncated block `{name}`")))?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        blocks.insert(name, Mat::from_vec(rows, cols, data));
    }
    Ok(blocks)
}

fn take_params(blocks: &mut Blocks, prefix: &str) -> Result<LstmParams<f32>, CheckpointError> {
    let mut take = |name: &str| -> Result<Mat<f32>, CheckpointError> {
        blocks
            .remove(&format!("{prefix}.{name}"))
            .ok_or_else(|| CheckpointError::Malformed(format!("missing block {prefix}.{name}")))
    };
    let embed = take("embed")?;
    let (vocab, hidden) = (embed.rows, embed.cols);
    let p = LstmParams {
        hidden,
        vocab,
        embed,
        w_input: take("w_input")?,
        w_forget: take("w_forget")?,
        w_output: take("w_output")?,
        w_cell: take("w_cell")?,
        b_input: take("b_input")?.data,
        b_forget: take("b_forget")?.data,
        b_output: take("b_output")?.data,
        b_cell: take("b_cell")?.data,
        w_proj: take("w_proj")?,
        b_proj: take("b_proj")?.data,
    };
    if p.w_input.rows != 2 * hidden || p.w_proj.cols != vocab || p.b_proj.len() != vocab {
        return Err(CheckpointError::Malformed(format!(
            "inconsistent shapes in `{prefix}` blocks"
        )));
    }
    Ok(p)
}
