//! Frequency-ranked token vocabularies with reserved special ids.
//!
//! Ids 0..=3 are pinned to `<pad>`, `<bos>`, `<eos>`, `<unk>` and are never
//! reassigned. Remaining ids go to corpus tokens by descending frequency,
//! ties broken lexicographically, so two builds over the same stream agree
//! exactly. The method side and the comment side each get their own table.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

const FILE_HEADER_PREFIX: &str = "craic-vocab v1";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("empty token stream")]
    EmptyStream,
    #[error("max vocabulary size {0} is below the minimum of 5")]
    MaxSizeTooSmall(usize),
    #[error("malformed vocabulary file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
}

impl Vocabulary {
    /// Build from a token stream, keeping at most `max_size` entries
    /// (reserved ids included).
    pub fn build<I, S>(stream: I, max_size: usize) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < 5 {
            return Err(VocabError::MaxSizeTooSmall(max_size));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0usize;
        for token in stream {
            let token = token.as_ref();
            total += 1;
            if RESERVED.contains(&token) {
                continue;
            }
            *counts.entry(token.to_string()).or_insert(0) += 1;
        }
        if total == 0 {
            return Err(VocabError::EmptyStream);
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());

        let mut token_of: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        token_of.extend(ranked.into_iter().map(|(t, _)| t));
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary { id_of, token_of })
    }

    pub fn size(&self) -> usize {
        self.token_of.len()
    }

    /// Id for a token; out-of-vocabulary tokens map to UNK.
    pub fn id(&self, token: &str) -> u32 {
        self.id_of.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(|s| s.as_str())
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], add_bos_eos: bool) -> Vec<u32> {
        let mut out = Vec::with_capacity(tokens.len() + 2);
        if add_bos_eos {
            out.push(BOS);
        }
        out.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        if add_bos_eos {
            out.push(EOS);
        }
        out
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .filter_map(|&id| self.token(id).map(str::to_string))
            .collect()
    }

    // Tokens may contain newlines (text blocks) or backslashes; escape them
    // so the one-token-per-line format stays parseable.
    fn escape(token: &str) -> String {
        token
            .replace('\\', "\\\\")
            .replace('\n', "\\n")
            .replace('\r', "\\r")
    }

    fn unescape(line: &str) -> String {
        let mut out = String::with_capacity(line.len());
        let mut chars = line.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        }
        out
    }

    /// Write the pinned file format: a `craic-vocab v1 <size>` header line,
    /// then one token per line in id order.
    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{FILE_HEADER_PREFIX} {}", self.size())?;
        for token in &self.token_of {
            writeln!(writer, "{}", Self::escape(token))?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, VocabError> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| VocabError::Malformed("missing header".into()))??;
        let size: usize = header
            .strip_prefix(FILE_HEADER_PREFIX)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| VocabError::Malformed(format!("bad header `{header}`")))?;
        let mut token_of = Vec::with_capacity(size);
        for line in lines {
            token_of.push(Self::unescape(&line?));
        }
        if token_of.len() != size {
            return Err(VocabError::Malformed(format!(
                "header claims {size} tokens, file has {}",
                token_of.len()
            )));
        }
        for (i, want) in RESERVED.iter().enumerate() {
            if token_of.get(i).map(String::as_str) != Some(*want) {
                return Err(VocabError::Malformed(format!(
                    "reserved id {i} must be `{want}`"
                )));
            }
        }
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary { id_of, token_of })
    }

    pub fn to_file(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn from_file(path: &Path) -> Result<Self, VocabError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order() {
        let v = Vocabulary::build(["a", "a", "b"], 6).unwrap();
        assert_eq!(v.size(), 6);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocabulary::build(["b", "a", "b", "a"], 6).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
    }

    #[test]
    fn cutoff_sends_rare_tokens_to_unk() {
        // 30 distinct tokens with descending frequency, room for 6 of them.
        let mut stream = Vec::new();
        for i in 0..30 {
            for _ in 0..(30 - i) {
                stream.push(format!("tok{i:02}"));
            }
        }
        let v = Vocabulary::build(stream.iter(), 10).unwrap();
        assert_eq!(v.size(), 10);
        assert_eq!(v.id("tok00"), 4);
        assert_eq!(v.id("tok05"), 9);
        assert_eq!(v.id("tok06"), UNK);
        assert_eq!(v.id("tok29"), UNK);
    }

    #[test]
    fn size_caps_at_distinct_count() {
        let v = Vocabulary::build(["x"], 25000).unwrap();
        assert_eq!(v.size(), 5);
    }

    #[test]
    fn empty_stream_is_error() {
        assert!(matches!(
            Vocabulary::build(Vec::<String>::new(), 10),
            Err(VocabError::EmptyStream)
        ));
    }

    #[test]
    fn max_size_too_small() {
        assert!(matches!(
            Vocabulary::build(["a"], 4),
            Err(VocabError::MaxSizeTooSmall(4))
        ));
    }

    #[test]
    fn encode_examples() {
        let v = Vocabulary::build(["a", "a", "b"], 6).unwrap();
        assert_eq!(v.encode(&["a", "b"], true), vec![BOS, 4, 5, EOS]);
        assert_eq!(v.encode(&["z"], false), vec![UNK]);
        assert_eq!(v.encode::<&str>(&[], true), vec![BOS, EOS]);
    }

    #[test]
    fn round_trip_in_vocabulary() {
        let v = Vocabulary::build(["a", "a", "b"], 6).unwrap();
        let ids = v.encode(&["a", "b", "a"], false);
        assert_eq!(v.decode(&ids), vec!["a", "b", "a"]);
    }

    #[test]
    fn file_round_trip() {
        let v = Vocabulary::build(["get", "id", "get", "weird\ntoken"], 10).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("craic-vocab v1 "));
        let back = Vocabulary::read_from(&buf[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_corrupt_header() {
        assert!(Vocabulary::read_from(&b"nonsense\n"[..]).is_err());
        assert!(Vocabulary::read_from(&b"craic-vocab v1 9\n<pad>\n"[..]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn no_encoded_id_out_of_range(tokens in proptest::collection::vec("[a-z]{1,4}", 1..50)) {
            let v = Vocabulary::build(tokens.iter(), 12).unwrap();
            for id in v.encode(&tokens, true) {
                proptest::prop_assert!((id as usize) < v.size());
            }
        }

        #[test]
        fn build_is_deterministic(tokens in proptest::collection::vec("[a-c]{1,2}", 1..40)) {
            let a = Vocabulary::build(tokens.iter(), 8).unwrap();
            let b = Vocabulary::build(tokens.iter(), 8).unwrap();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
