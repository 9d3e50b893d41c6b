//! Method compression: bound a method to at most L tokens before it
//! conditions the sequence model.
//!
//! Three schemes: keep the signature only, sample tokens from both ends of
//! the method, or keep the signature plus body identifiers selected by a
//! salience precedence (braces > locals > globals > user types > external
//! methods > local methods > formals). All schemes operate on raw token
//! texts as stored in pair records, with the signature/body partition
//! preserved; identifiers are subtokenized on emission.

use crate::extract::is_keyword;
use crate::textprep::code_token_subtokens_from_text;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

pub const DEFAULT_MAX_TOKENS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressionScheme {
    Signature,
    BeginEnd,
    Identifier,
}

impl CompressionScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            CompressionScheme::Signature => "signature",
            CompressionScheme::BeginEnd => "begin-end",
            CompressionScheme::Identifier => "identifier",
        }
    }
}

impl FromStr for CompressionScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signature" => Ok(CompressionScheme::Signature),
            "begin-end" => Ok(CompressionScheme::BeginEnd),
            "identifier" => Ok(CompressionScheme::Identifier),
            other => Err(format!(
                "unknown compression scheme `{other}` (expected signature|begin-end|identifier)"
            )),
        }
    }
}

impl std::fmt::Display for CompressionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedMethod {
    pub tokens: Vec<String>,
    pub scheme: CompressionScheme,
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IdentCategory {
    Brace,
    Local,
    Global,
    UserType,
    ExternalMethod,
    LocalMethod,
    Formal,
}

/// One classified identifier occurrence in a method body.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifierOccurrence {
    pub name: String,
    pub category: IdentCategory,
    /// Index into the body token list.
    pub body_index: usize,
}

// Rough token classification recovered from text alone; pair records store
// token texts without kinds.
#[derive(Clone, Copy, PartialEq)]
enum Tok {
    Ident,
    Keyword,
    Literal,
    Other,
}

fn classify_text(text: &str) -> Tok {
    if matches!(text, "true" | "false" | "null") {
        return Tok::Literal;
    }
    if is_keyword(text) {
        return Tok::Keyword;
    }
    match text.chars().next() {
        Some(c) if c.is_ascii_digit() || c == '"' || c == '\'' => Tok::Literal,
        Some('.') if text.chars().nth(1).is_some_and(|c| c.is_ascii_digit()) => Tok::Literal,
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => Tok::Ident,
        _ => Tok::Other,
    }
}

fn flat_subtokens(texts: &[String]) -> Vec<String> {
    texts
        .iter()
        .flat_map(|t| code_token_subtokens_from_text(t))
        .collect()
}

/// Scheme (a): the subtokenized signature, truncated to the first L tokens.
pub fn compress_signature(signature: &[String], l: usize) -> CompressedMethod {
    let mut tokens = flat_subtokens(signature);
    let truncated = tokens.len() > l;
    tokens.truncate(l);
    CompressedMethod {
        tokens,
        scheme: CompressionScheme::Signature,
        truncated,
    }
}

/// Scheme (b): identity when the method fits in L tokens, otherwise the
/// first ceil(L/2) tokens followed by the last floor(L/2).
pub fn compress_begin_end(signature: &[String], body: &[String], l: usize) -> CompressedMethod {
    let mut tokens = flat_subtokens(signature);
    tokens.extend(flat_subtokens(body));
    if tokens.len() <= l {
        return CompressedMethod {
            tokens,
            scheme: CompressionScheme::BeginEnd,
            truncated: false,
        };
    }
    let head = l.div_ceil(2);
    let tail = l / 2;
    let mut kept = tokens[..head].to_vec();
    kept.extend_from_slice(&tokens[tokens.len() - tail..]);
    CompressedMethod {
        tokens: kept,
        scheme: CompressionScheme::BeginEnd,
        truncated: true,
    }
}

/// Comments are bounded by the same budget: keep the first min(L, n) tokens.
pub fn truncate_comment(tokens: &[String], l: usize) -> Vec<String> {
    tokens[..tokens.len().min(l)].to_vec()
}

const PRIMITIVE_WRAPPERS: &[&str] = &[
    "Boolean", "Byte", "Character", "Double", "Float", "Integer", "Long", "Short",
];

const PRIMITIVE_TYPES: &[&str] = &[
    "boolean", "byte", "char", "double", "float", "int", "long", "short",
];

fn starts_uppercase(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Formal parameter names: identifiers at angle-depth 0 in the parameter
/// list whose next structural token is `,` or the closing `)`.
fn formal_names(signature: &[String]) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let Some(close) = signature.iter().rposition(|t| t == ")") else {
        return names;
    };
    let mut open = None;
    let mut depth = 0i32;
    for i in (0..=close).rev() {
        match signature[i].as_str() {
            ")" => depth += 1,
            "(" => {
                depth -= 1;
                if depth == 0 {
                    open = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let Some(open) = open else { return names };
    let params = &signature[open + 1..close];

    let mut angle = 0i32;
    let mut i = 0usize;
    while i < params.len() {
        let t = params[i].as_str();
        if t == "@" {
            // Skip annotation name and argument group.
            i += 1;
            while i < params.len()
                && (classify_text(&params[i]) == Tok::Ident || params[i] == ".")
            {
                i += 1;
            }
            if i < params.len() && params[i] == "(" {
                let mut d = 0i32;
                while i < params.len() {
                    if params[i] == "(" {
                        d += 1;
                    } else if params[i] == ")" {
                        d -= 1;
                        if d == 0 {
                            i += 1;
                            break;
                        }
                    }
                    i += 1;
                }
            }
            continue;
        }
        angle += match t {
            "<" => 1,
            ">" => -1,
            ">>" => -2,
            ">>>" => -3,
            _ => 0,
        };
        if angle <= 0 && classify_text(t) == Tok::Ident {
            // Peek past array brackets.
            let mut j = i + 1;
            while j < params.len() && (params[j] == "[" || params[j] == "]") {
                j += 1;
            }
            if j >= params.len() || params[j] == "," {
                names.insert(params[i].clone());
            }
        }
        angle = angle.max(0);
        i += 1;
    }
    names
}

fn is_type_like(text: &str) -> bool {
    classify_text(text) == Tok::Ident || PRIMITIVE_TYPES.contains(&text)
}

/// A body position that declares a name: `Type name =`, `Type name;`,
/// `for (Type name : ...)`, `catch (Type name)` and the like.
fn is_declaration_position(body: &[String], i: usize) -> bool {
    if i == 0 {
        return false;
    }
    let prev = body[i - 1].as_str();
    let prev_ok = is_type_like(prev) || prev == ">" || prev == "]";
    if !prev_ok {
        return false;
    }
    matches!(
        body.get(i + 1).map(|s| s.as_str()),
        Some("=") | Some(";") | Some(",") | Some(":") | Some(")")
    )
}

/// Classify every identifier occurrence in the body. `local_methods` holds
/// method names defined in the same file.
pub fn classify_identifiers(
    signature: &[String],
    body: &[String],
    local_methods: &BTreeSet<String>,
) -> Vec<IdentifierOccurrence> {
    let formals = formal_names(signature);

    // Names whose first body occurrence is a declaration are locals.
    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in body.iter().enumerate() {
        if classify_text(t) == Tok::Ident {
            first_seen.entry(t.as_str()).or_insert(i);
        }
    }
    let locals: BTreeSet<&str> = first_seen
        .iter()
        .filter(|(_, &i)| is_declaration_position(body, i))
        .map(|(&name, _)| name)
        .collect();

    let mut out = Vec::new();
    for (i, t) in body.iter().enumerate() {
        if classify_text(t) != Tok::Ident {
            continue;
        }
        let name = t.as_str();
        let next = body.get(i + 1).map(|s| s.as_str());
        let prev = i.checked_sub(1).map(|p| body[p].as_str());

        let type_position = starts_uppercase(name) && !PRIMITIVE_WRAPPERS.contains(&name);
        let category = if type_position && prev == Some("new") {
            // Constructor calls are type usages, not method calls.
            IdentCategory::UserType
        } else if next == Some("(") {
            if local_methods.contains(name) {
                IdentCategory::LocalMethod
            } else {
                IdentCategory::ExternalMethod
            }
        } else if type_position
            && (prev == Some("instanceof")
                || next.is_some_and(|n| classify_text(n) == Tok::Ident)
                || next == Some("<")
                || (prev == Some("(") && next == Some(")")))
        {
            IdentCategory::UserType
        } else if formals.contains(name) {
            IdentCategory::Formal
        } else if locals.contains(name) {
            IdentCategory::Local
        } else {
            IdentCategory::Global
        };
        out.push(IdentifierOccurrence {
            name: name.to_string(),
            category,
            body_index: i,
        });
    }
    out
}

/// Scheme (c): signature subtokens, then a greedy fill of body braces and
/// identifier occurrences in salience order, emitted in source order.
///
/// Braces take the budget first; after selection, inner brace pairs that end
/// up enclosing no selected identifier are dropped (the outermost body pair
/// always stays). Dropped braces do not refund the budget; the fill is a
/// single pass, so an occurrence that does not fit ends the fill.
pub fn compress_identifier(
    signature: &[String],
    body: &[String],
    local_methods: &BTreeSet<String>,
    l: usize,
) -> CompressedMethod {
    let sig_tokens = flat_subtokens(signature);
    if sig_tokens.len() >= l {
        let truncated = sig_tokens.len() > l || !body.is_empty();
        let mut tokens = sig_tokens;
        tokens.truncate(l);
        return CompressedMethod {
            tokens,
            scheme: CompressionScheme::Identifier,
            truncated,
        };
    }
    let mut budget = l - sig_tokens.len();

    let brace_positions: Vec<usize> = body
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == "{" || *t == "}")
        .map(|(i, _)| i)
        .collect();
    let occurrences = classify_identifiers(signature, body, local_methods);

    let mut truncated = false;
    let mut selected_braces: BTreeSet<usize> = BTreeSet::new();
    for &pos in &brace_positions {
        if budget == 0 {
            truncated = true;
            break;
        }
        selected_braces.insert(pos);
        budget -= 1;
    }

    let mut selected_idents: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    if !truncated {
        'fill: for category in [
            IdentCategory::Local,
            IdentCategory::Global,
            IdentCategory::UserType,
            IdentCategory::ExternalMethod,
            IdentCategory::LocalMethod,
            IdentCategory::Formal,
        ] {
            for occ in occurrences.iter().filter(|o| o.category == category) {
                let subtokens = code_token_subtokens_from_text(&occ.name);
                if subtokens.len() > budget {
                    truncated = true;
                    break 'fill;
                }
                budget -= subtokens.len();
                selected_idents.insert(occ.body_index, subtokens);
            }
        }
    }

    // Match brace pairs so empty nesting can be pruned.
    let mut partner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut stack = Vec::new();
    for &pos in &brace_positions {
        if body[pos] == "{" {
            stack.push(pos);
        } else if let Some(open) = stack.pop() {
            partner.insert(open, pos);
            partner.insert(pos, open);
        }
    }
    let outer_open = brace_positions.first().copied();
    let outer_close = outer_open.and_then(|o| partner.get(&o)).copied();
    let encloses_selection = |a: usize, b: usize| -> bool {
        selected_idents.range(a + 1..b).next().is_some()
    };
    let kept_braces: Vec<usize> = selected_braces
        .iter()
        .copied()
        .filter(|&pos| {
            if Some(pos) == outer_open || Some(pos) == outer_close {
                return true;
            }
            match partner.get(&pos) {
                Some(&other) => {
                    let (a, b) = (pos.min(other), pos.max(other));
                    encloses_selection(a, b)
                }
                None => true,
            }
        })
        .collect();

    let mut tokens = sig_tokens;
    let mut emit: Vec<(usize, Vec<String>)> = kept_braces
        .into_iter()
        .map(|pos| (pos, vec![body[pos].clone()]))
        .chain(selected_idents)
        .collect();
    emit.sort_by_key(|(pos, _)| *pos);
    for (_, subtokens) in emit {
        tokens.extend(subtokens);
    }
    debug_assert!(tokens.len() <= l);
    CompressedMethod {
        tokens,
        scheme: CompressionScheme::Identifier,
        truncated,
    }
}

/// Apply one scheme.
pub fn compress(
    scheme: CompressionScheme,
    signature: &[String],
    body: &[String],
    local_methods: &BTreeSet<String>,
    l: usize,
) -> CompressedMethod {
    match scheme {
        CompressionScheme::Signature => compress_signature(signature, l),
        CompressionScheme::BeginEnd => compress_begin_end(signature, body, l),
        CompressionScheme::Identifier => compress_identifier(signature, body, local_methods, l),
    }
}
