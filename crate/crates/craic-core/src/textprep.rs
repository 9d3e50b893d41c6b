//! Comment sentence segmentation, tokenization and identifier
//! subtokenization.
//!
//! Everything here is rule-based and pure. Javadoc `@tag` line groups are
//! treated as single sentences; free-form text splits on sentence-final
//! punctuation with a small fixed abbreviation guard list. Code and comment
//! tokens are lower-cased, camelCase/underscore/digit boundaries split
//! identifiers into subtokens, and string literals stay whole.

use crate::extract::{is_keyword, MethodFullCommentPair, RawComment, TokenKind};
use crate::rng::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("insufficient pairs: requested {requested}, have {available}")]
    InsufficientPairs { requested: usize, available: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommentSentence {
    /// Lower-cased subtokens, never empty.
    pub tokens: Vec<String>,
    /// `@param`, `@return`, ... when the sentence is a Javadoc tag group, or
    /// the first inline `{@tag ...}` name for otherwise untagged sentences.
    pub javadoc_tag: Option<String>,
    pub source_pair_id: String,
    /// Whitespace-normalized sentence text, kept for reports.
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodCommentPair {
    /// Subtokenized, lower-cased code tokens: signature then body.
    pub method_tokens: Vec<String>,
    pub sentence: CommentSentence,
}

const ABBREVIATIONS: &[&str] = &["e.g.", "i.e.", "etc.", "vs."];

/// Split one comment into sentences, returning `(text, javadoc_tag)` in
/// order. Tag groups run from their `@tag` line up to the next tag line.
pub fn segment_sentences(comment: &RawComment) -> Vec<(String, Option<String>)> {
    let lines: Vec<&str> = comment.text.split('\n').collect();
    let tag_of = |line: &str| -> Option<String> {
        let trimmed = line.trim_start();
        let rest = trimmed.strip_prefix('@')?;
        let name: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
        (!name.is_empty()).then(|| format!("@{name}"))
    };

    let first_tag = lines
        .iter()
        .position(|l| tag_of(l).is_some())
        .unwrap_or(lines.len());

    let mut out = Vec::new();
    let free_text = lines[..first_tag].join("\n");
    for sentence in split_free_text(&free_text) {
        out.push((sentence, None));
    }

    let mut i = first_tag;
    while i < lines.len() {
        let tag = tag_of(lines[i]).expect("group starts at a tag line");
        let mut j = i + 1;
        while j < lines.len() && tag_of(lines[j]).is_none() {
            j += 1;
        }
        let text = normalize_ws(&lines[i..j].join("\n"));
        if !text.is_empty() {
            out.push((text, Some(tag)));
        }
        i = j;
    }
    out
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Sentence-final `.`/`?`/`!` followed by line end or whitespace plus an
/// uppercase letter ends a sentence, unless a guarded abbreviation precedes.
fn split_free_text(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for i in 0..chars.len() {
        let c = chars[i];
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        if c == '.' && is_guarded_abbreviation(&chars[start..=i]) {
            continue;
        }
        // Look ahead past spaces and tabs.
        let mut j = i + 1;
        while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
            j += 1;
        }
        let boundary = j >= chars.len()
            || chars[j] == '\n'
            || (j > i + 1 && chars[j].is_uppercase());
        if boundary {
            let text: String = chars[start..=i].iter().collect();
            let text = normalize_ws(&text);
            if !text.is_empty() {
                sentences.push(text);
            }
            start = i + 1;
        }
    }
    let tail: String = chars[start..].iter().collect();
    let tail = normalize_ws(&tail);
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

fn is_guarded_abbreviation(prefix: &[char]) -> bool {
    let text: String = prefix.iter().collect::<String>().to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        if !text.ends_with(abbr) {
            return false;
        }
        let before = text.len() - abbr.len();
        before == 0
            || text[..before]
                .chars()
                .next_back()
                .is_some_and(|c| !c.is_alphabetic() && c != '.')
    })
}

/// Split an identifier-like token at camelCase, acronym, underscore and
/// letter/digit boundaries; output is lower-cased. Underscores are dropped;
/// every other character is preserved, so the concatenated output equals the
/// case-folded input with underscores removed.
pub fn subtokenize(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut parts: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' {
            if !current.is_empty() {
                parts.push(std::mem::take(&mut current));
            }
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (p.is_lowercase() && c.is_uppercase())
                || (p.is_uppercase() && c.is_uppercase() && next_lower)
                || (p.is_alphabetic() && c.is_ascii_digit())
                || (p.is_ascii_digit() && c.is_alphabetic());
            if boundary && !current.is_empty() {
                parts.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
        prev = Some(c);
    }
    if !current.is_empty() {
        parts.push(current);
    }
    parts.into_iter().map(|p| p.to_lowercase()).collect()
}

/// Tokenize comment text: whitespace separates, punctuation stands alone,
/// `@tag` tokens stay whole, words are subtokenized and lower-cased.
pub fn tokenize_comment(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '@' && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic()) {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_alphabetic() {
                j += 1;
            }
            let tag: String = chars[i..j].iter().collect();
            out.push(tag.to_lowercase());
            i = j;
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            out.extend(subtokenize(&word));
            i = j;
            continue;
        }
        out.push(c.to_string());
        i += 1;
    }
    out
}

/// Subtokens of one code token. String/char/number literals stay whole
/// (lower-cased); keywords have no boundaries and pass through subtokenize.
pub fn code_token_subtokens(text: &str, kind: TokenKind) -> Vec<String> {
    if kind == TokenKind::Literal {
        vec![text.to_lowercase()]
    } else {
        subtokenize(text)
    }
}

/// Same as [`code_token_subtokens`] when only the token text is available
/// (records round-tripped through files drop the kind).
pub fn code_token_subtokens_from_text(text: &str) -> Vec<String> {
    let first = text.chars().next();
    let literal = matches!(first, Some(c) if c.is_ascii_digit() || c == '"' || c == '\'')
        || matches!(text, "true" | "false" | "null")
        || (first == Some('.') && text.chars().nth(1).is_some_and(|c| c.is_ascii_digit()));
    if literal {
        vec![text.to_lowercase()]
    } else {
        let _ = is_keyword(text); // keywords subtokenize to themselves
        subtokenize(text)
    }
}

/// Subtokenized, lower-cased method tokens: signature then body.
pub fn method_subtokens(pair: &MethodFullCommentPair) -> Vec<String> {
    pair.method
        .signature_tokens
        .iter()
        .chain(&pair.method.body_tokens)
        .flat_map(|t| code_token_subtokens(&t.text, t.kind))
        .collect()
}

/// Base identifier of a mined pair: `file:line` of the method.
pub fn pair_base_id(pair: &MethodFullCommentPair) -> String {
    format!("{}:{}", pair.method.file_id, pair.method.start_line)
}

fn inline_tag(text: &str) -> Option<String> {
    let at = text.find("{@")?;
    let name: String = text[at + 2..]
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    (!name.is_empty()).then(|| format!("@{name}"))
}

/// One `MethodCommentPair` per segmented sentence; the method tokens are
/// shared across the emitted pairs. Sentences whose tokenization comes out
/// empty are dropped.
pub fn build_pairs(pair: &MethodFullCommentPair) -> Vec<MethodCommentPair> {
    let method_tokens = method_subtokens(pair);
    let base = pair_base_id(pair);
    segment_sentences(&pair.comment)
        .into_iter()
        .enumerate()
        .filter_map(|(k, (text, block_tag))| {
            let tokens = tokenize_comment(&text);
            if tokens.is_empty() {
                return None;
            }
            let javadoc_tag = block_tag.or_else(|| inline_tag(&text));
            Some(MethodCommentPair {
                method_tokens: method_tokens.clone(),
                sentence: CommentSentence {
                    tokens,
                    javadoc_tag,
                    source_pair_id: format!("{base}#{k}"),
                    text,
                },
            })
        })
        .collect()
}

/// Uniform draw without replacement into train/valid/test, deterministic for
/// a fixed seed. Order within each split follows the input order.
pub fn split_corpus<T>(
    items: Vec<T>,
    train_n: usize,
    valid_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), TextprepError> {
    let total = train_n + valid_n + test_n;
    if total > items.len() {
        return Err(TextprepError::InsufficientPairs {
            requested: total,
            available: items.len(),
        });
    }
    let mut indices: Vec<usize> = (0..items.len()).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut indices);

    #[derive(Clone, Copy, PartialEq)]
    enum Dest {
        Train,
        Valid,
        Test,
        Unused,
    }
    let mut dest = vec![Dest::Unused; items.len()];
    for (rank, &idx) in indices.iter().enumerate() {
        dest[idx] = if rank < train_n {
            Dest::Train
        } else if rank < train_n + valid_n {
            Dest::Valid
        } else if rank < total {
            Dest::Test
        } else {
            Dest::Unused
        };
    }
    let mut train = Vec::with_capacity(train_n);
    let mut valid = Vec::with_capacity(valid_n);
    let mut test = Vec::with_capacity(test_n);
    for (item, d) in items.into_iter().zip(dest) {
        match d {
            Dest::Train => train.push(item),
            Dest::Valid => valid.push(item),
            Dest::Test => test.push(item),
            Dest::Unused => {}
        }
    }
    Ok((train, valid, test))
}
