//! Line-delimited record formats passed between pipeline stages.

use crate::extract::MethodFullCommentPair;
use crate::textprep::MethodCommentPair;
use serde::{Deserialize, Serialize};

/// One mined method/full-comment pair (extract stage output). Token arrays
/// hold raw token texts with whitespace and comments already removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub file: String,
    pub line: u32,
    pub method_name: String,
    pub signature_tokens: Vec<String>,
    pub body_tokens: Vec<String>,
    pub comment_text: String,
    pub javadoc_style: bool,
}

impl PairRecord {
    pub fn from_pair(pair: &MethodFullCommentPair) -> Self {
        PairRecord {
            file: pair.method.file_id.clone(),
            line: pair.method.start_line,
            method_name: pair.method.name.clone(),
            signature_tokens: pair
                .method
                .signature_tokens
                .iter()
                .map(|t| t.text.clone())
                .collect(),
            body_tokens: pair.method.body_tokens.iter().map(|t| t.text.clone()).collect(),
            comment_text: pair.comment.text.clone(),
            javadoc_style: pair.comment.is_javadoc_style,
        }
    }

    pub fn pair_id(&self) -> String {
        format!("{}:{}", self.file, self.line)
    }
}

/// One method/comment-sentence pair (textprep stage output).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub pair_id: String,
    pub file: String,
    pub line: u32,
    pub method_tokens: Vec<String>,
    pub sentence_text: String,
    pub sentence_tokens: Vec<String>,
    pub javadoc_tag: Option<String>,
}

impl SentenceRecord {
    pub fn from_pair(record: &PairRecord, pair: &MethodCommentPair) -> Self {
        SentenceRecord {
            pair_id: pair.sentence.source_pair_id.clone(),
            file: record.file.clone(),
            line: record.line,
            method_tokens: pair.method_tokens.clone(),
            sentence_text: pair.sentence.text.clone(),
            sentence_tokens: pair.sentence.tokens.clone(),
            javadoc_tag: pair.sentence.javadoc_tag.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// One training/evaluation unit (prep stage output): a sentence record plus
/// the compressed method and its split assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub pair_id: String,
    pub file: String,
    pub line: u32,
    pub method_tokens: Vec<String>,
    pub compressed_method_tokens: Vec<String>,
    pub sentence_text: String,
    pub sentence_tokens: Vec<String>,
    pub javadoc_tag: Option<String>,
    pub split: Split,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{lex_java, mine_pairs};
    use crate::textprep::build_pairs;

    #[test]
    fn pair_record_round_trips_as_json_line() {
        let src = "/* Returns the id. */\nint getId() { return id; }\n";
        let mined = mine_pairs(&lex_java(src).tokens, "A.java");
        let record = PairRecord::from_pair(&mined.pairs[0]);
        let line = serde_json::to_string(&record).unwrap();
        assert!(!line.contains('\n'));
        let back: PairRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
        assert_eq!(back.pair_id(), "A.java:2");
    }

    #[test]
    fn sentence_record_carries_tag() {
        let src = "/** Sets x.\n@param x the value\n*/\nvoid setX(int x) { this.x = x; }\n";
        let mined = mine_pairs(&lex_java(src).tokens, "B.java");
        let record = PairRecord::from_pair(&mined.pairs[0]);
        let pairs = build_pairs(&mined.pairs[0]);
        assert_eq!(pairs.len(), 2);
        let sent = SentenceRecord::from_pair(&record, &pairs[1]);
        assert_eq!(sent.javadoc_tag.as_deref(), Some("@param"));
        assert_eq!(sent.pair_id, "B.java:4#1");
    }

    #[test]
    fn split_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&Split::Train).unwrap(), "\"train\"");
    }
}
