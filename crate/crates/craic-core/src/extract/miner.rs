//! Mine method-level comment/method pairs from a lexed token stream.
//!
//! Method boundaries are found by signature pattern plus brace matching, not
//! by parsing. A pair is emitted for every method (constructors included)
//! whose immediately preceding non-whitespace token is a block comment
//! ending on an earlier line; annotations between the comment and the
//! signature do not break adjacency because they are part of the signature.
//! Methods without such a comment are skipped, as are methods nested inside
//! another method's body (the outer method owns its body). Line comments
//! never count as method comments.

use super::lexer::{SourceToken, TokenKind};
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct RawMethod {
    /// From the first modifier/annotation/return-type token through the end
    /// of the `throws` clause (or the closing parenthesis when there is
    /// none). Whitespace and comment tokens are stripped.
    pub signature_tokens: Vec<SourceToken>,
    /// From `{` through the matching `}`, whitespace and comments stripped.
    pub body_tokens: Vec<SourceToken>,
    pub name: String,
    pub file_id: String,
    pub start_line: u32,
}

#[derive(Clone, Debug)]
pub struct RawComment {
    /// Comment text with delimiters stripped and per-line `*` gutters
    /// removed. Line structure is preserved.
    pub text: String,
    pub start_line: u32,
    /// True iff the opening delimiter was `/**`.
    pub is_javadoc_style: bool,
}

#[derive(Clone, Debug)]
pub struct MethodFullCommentPair {
    pub method: RawMethod,
    pub comment: RawComment,
}

#[derive(Clone, Debug)]
pub enum MineIssue {
    BraceImbalance { line: u32 },
}

#[derive(Debug, Default)]
pub struct MineOutput {
    pub pairs: Vec<MethodFullCommentPair>,
    /// Every method name found in the file, commented or not. Used by the
    /// identifier compression scheme to tell locally defined calls from
    /// external ones.
    pub method_names: BTreeSet<String>,
    pub issues: Vec<MineIssue>,
}

/// Keywords that may appear inside a signature prefix (modifiers, primitive
/// return types, `void`).
const SIGNATURE_KEYWORDS: &[&str] = &[
    "abstract", "boolean", "byte", "char", "default", "double", "final", "float", "int", "long",
    "native", "private", "protected", "public", "short", "static", "strictfp", "synchronized",
    "transient", "void", "volatile",
];

fn is_trivia(t: &SourceToken) -> bool {
    matches!(t.kind, TokenKind::Whitespace | TokenKind::Comment)
}

fn is_punct(t: &SourceToken, text: &str) -> bool {
    t.kind == TokenKind::Punctuation && t.text == text
}

fn prev_nontrivia(tokens: &[SourceToken], from: usize) -> Option<usize> {
    (0..from).rev().find(|&i| !is_trivia(&tokens[i]))
}

fn next_nontrivia(tokens: &[SourceToken], from: usize) -> Option<usize> {
    (from + 1..tokens.len()).find(|&i| !is_trivia(&tokens[i]))
}

/// Nearest preceding token skipping whitespace only (comments stop the walk).
fn prev_skipping_ws(tokens: &[SourceToken], from: usize) -> Option<usize> {
    (0..from)
        .rev()
        .find(|&i| tokens[i].kind != TokenKind::Whitespace)
}

fn matching_close(
    tokens: &[SourceToken],
    open: usize,
    open_text: &str,
    close_text: &str,
) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_punct(t, open_text) {
            depth += 1;
        } else if is_punct(t, close_text) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Matching `(` for a `)` at `close`, scanning backward.
fn matching_open_paren(tokens: &[SourceToken], close: usize) -> Option<usize> {
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        if is_punct(&tokens[i], ")") {
            depth += 1;
        } else if is_punct(&tokens[i], "(") {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Walk one annotation backward from its closing `)`: `@ Name ( ... )` or a
/// dotted `@ a . b ( ... )`. Returns the index of the `@` when the shape
/// matches.
fn annotation_start_from_close(tokens: &[SourceToken], close: usize) -> Option<usize> {
    let open = matching_open_paren(tokens, close)?;
    let mut cur = prev_nontrivia(tokens, open)?;
    if tokens[cur].kind != TokenKind::Identifier {
        return None;
    }
    loop {
        let prev = prev_nontrivia(tokens, cur)?;
        if is_punct(&tokens[prev], "@") {
            return Some(prev);
        }
        if is_punct(&tokens[prev], ".") {
            let prev2 = prev_nontrivia(tokens, prev)?;
            if tokens[prev2].kind == TokenKind::Identifier {
                cur = prev2;
                continue;
            }
        }
        return None;
    }
}

/// Angle-bracket depth change contributed by one token text.
fn angle_delta(text: &str) -> i32 {
    match text {
        "<" => 1,
        ">" => -1,
        ">>" => -2,
        ">>>" => -3,
        _ => 0,
    }
}

/// Reject parameter lists that look like call/enum-constant argument lists.
/// A plausible parameter segment has at least two non-annotation tokens, no
/// literals, and ends with an identifier (or `]` for C-style arrays).
fn params_look_declared(tokens: &[SourceToken]) -> bool {
    let mut segments: Vec<Vec<&SourceToken>> = vec![Vec::new()];
    let mut angle = 0i32;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if is_trivia(t) {
            i += 1;
            continue;
        }
        if is_punct(t, "@") {
            // Skip the annotation: name (dotted) and optional argument group.
            i += 1;
            while i < tokens.len()
                && (is_trivia(&tokens[i])
                    || tokens[i].kind == TokenKind::Identifier
                    || is_punct(&tokens[i], "."))
            {
                i += 1;
            }
            if i < tokens.len() && is_punct(&tokens[i], "(") {
                let mut depth = 0i32;
                while i < tokens.len() {
                    if is_punct(&tokens[i], "(") {
                        depth += 1;
                    } else if is_punct(&tokens[i], ")") {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    i += 1;
                }
            }
            continue;
        }
        angle += angle_delta(&t.text);
        if angle <= 0 && is_punct(t, ",") {
            angle = angle.max(0);
            segments.push(Vec::new());
        } else {
            segments.last_mut().unwrap().push(t);
        }
        i += 1;
    }
    if segments.len() == 1 && segments[0].is_empty() {
        return true; // no parameters
    }
    segments.iter().all(|seg| {
        if seg.len() < 2 {
            return false;
        }
        if seg.iter().any(|t| t.kind == TokenKind::Literal) {
            return false;
        }
        let last = seg.last().unwrap();
        last.kind == TokenKind::Identifier || is_punct(last, "]")
    })
}

/// Walk backward from the method name over modifiers, annotations and
/// return-type tokens; returns the first index of the signature.
fn signature_start(tokens: &[SourceToken], name_idx: usize) -> usize {
    let mut cur = name_idx;
    loop {
        let Some(p) = prev_nontrivia(tokens, cur) else {
            return cur;
        };
        let t = &tokens[p];
        let extend = match t.kind {
            TokenKind::Identifier => true,
            TokenKind::Keyword => SIGNATURE_KEYWORDS.contains(&t.text.as_str()),
            TokenKind::Operator => matches!(t.text.as_str(), "<" | ">" | ">>" | ">>>" | "&" | "?"),
            TokenKind::Punctuation => matches!(t.text.as_str(), "." | "," | "[" | "]" | "@"),
            _ => false,
        };
        if extend {
            cur = p;
            continue;
        }
        if is_punct(t, ")") {
            // Possibly the argument group of a preceding annotation.
            if let Some(at) = annotation_start_from_close(tokens, p) {
                cur = at;
                continue;
            }
        }
        return cur;
    }
}

/// Strip `/* ... */` delimiters and per-line `*` gutters.
fn to_raw_comment(token: &SourceToken) -> RawComment {
    let text = token.text.as_str();
    let is_javadoc = text.len() >= 5 && text.starts_with("/**");
    let inner = text
        .strip_prefix(if is_javadoc { "/**" } else { "/*" })
        .unwrap_or(text);
    let inner = inner.strip_suffix("*/").unwrap_or(inner);
    let mut lines: Vec<String> = inner
        .split('\n')
        .map(|line| {
            let mut rest = line.trim_start();
            while let Some(stripped) = rest.strip_prefix('*') {
                rest = stripped;
            }
            rest.strip_prefix(' ').unwrap_or(rest).trim_end().to_string()
        })
        .collect();
    while lines.first().is_some_and(|l| l.is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    RawComment {
        text: lines.join("\n"),
        start_line: token.line,
        is_javadoc_style: is_javadoc,
    }
}

fn comment_end_line(token: &SourceToken) -> u32 {
    token.line + token.text.matches('\n').count() as u32
}

pub fn mine_pairs(tokens: &[SourceToken], file_id: &str) -> MineOutput {
    let mut out = MineOutput::default();
    let mut i = 0usize;
    while i < tokens.len() {
        if !is_punct(&tokens[i], "(") {
            i += 1;
            continue;
        }
        let Some(candidate) = method_candidate(tokens, i) else {
            i += 1;
            continue;
        };
        let MethodCandidate {
            name_idx,
            sig_start,
            sig_end,
            brace_idx,
        } = candidate;

        let Some(body_close) = matching_close(tokens, brace_idx, "{", "}") else {
            out.issues.push(MineIssue::BraceImbalance {
                line: tokens[brace_idx].line,
            });
            i = brace_idx + 1;
            continue;
        };

        let name = tokens[name_idx].text.clone();
        out.method_names.insert(name.clone());
        let start_line = tokens[sig_start].line;

        // Pairing: nearest non-whitespace token before the signature must be
        // a block comment that ends on an earlier line.
        if let Some(p) = prev_skipping_ws(tokens, sig_start) {
            let t = &tokens[p];
            if t.kind == TokenKind::Comment
                && t.text.starts_with("/*")
                && comment_end_line(t) < start_line
            {
                let method = RawMethod {
                    signature_tokens: tokens[sig_start..=sig_end]
                        .iter()
                        .filter(|t| !is_trivia(t))
                        .cloned()
                        .collect(),
                    body_tokens: tokens[brace_idx..=body_close]
                        .iter()
                        .filter(|t| !is_trivia(t))
                        .cloned()
                        .collect(),
                    name,
                    file_id: file_id.to_string(),
                    start_line,
                };
                out.pairs.push(MethodFullCommentPair {
                    method,
                    comment: to_raw_comment(t),
                });
            }
        }
        // The outer method owns its body: skip past it entirely.
        i = body_close + 1;
    }
    out
}

struct MethodCandidate {
    name_idx: usize,
    sig_start: usize,
    sig_end: usize,
    brace_idx: usize,
}

/// Check whether the `(` at `open` is the parameter list of a method
/// declaration with a body.
fn method_candidate(tokens: &[SourceToken], open: usize) -> Option<MethodCandidate> {
    let name_idx = prev_nontrivia(tokens, open)?;
    if tokens[name_idx].kind != TokenKind::Identifier {
        return None;
    }
    if let Some(before) = prev_nontrivia(tokens, name_idx) {
        let t = &tokens[before];
        // Calls (`x.foo(...)`), instantiations (`new Foo(...) {`), annotation
        // uses (`@Foo(...)`) and record headers are not method declarations.
        if is_punct(t, ".") || is_punct(t, "@") {
            return None;
        }
        if t.kind == TokenKind::Keyword && t.text == "new" {
            return None;
        }
        if t.kind == TokenKind::Identifier && t.text == "record" {
            return None;
        }
    }
    let close = matching_close(tokens, open, "(", ")")?;
    if !params_look_declared(&tokens[open + 1..close]) {
        return None;
    }

    // Optional throws clause, then the body must open with `{`.
    let mut sig_end = close;
    let mut j = next_nontrivia(tokens, close)?;
    if tokens[j].kind == TokenKind::Keyword && tokens[j].text == "throws" {
        sig_end = j;
        loop {
            let k = next_nontrivia(tokens, sig_end)?;
            let t = &tokens[k];
            let in_clause = t.kind == TokenKind::Identifier
                || is_punct(t, ".")
                || is_punct(t, ",")
                || is_punct(t, "@");
            if in_clause {
                sig_end = k;
            } else {
                j = k;
                break;
            }
        }
    }
    if !is_punct(&tokens[j], "{") {
        return None;
    }
    Some(MethodCandidate {
        name_idx,
        sig_start: signature_start(tokens, name_idx),
        sig_end,
        brace_idx: j,
    })
}
