//! Token-level Java lexer.
//!
//! Lexing is deliberately standalone: no parsing, no symbol resolution.
//! The stream keeps whitespace and comments as tokens so that concatenating
//! every token's text reproduces the input byte-for-byte, which downstream
//! passes rely on. Malformed input never aborts a file; unterminated
//! literals and comments are reported as diagnostics and lexing resumes on
//! the next line.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punctuation,
    Comment,
    Whitespace,
}

#[derive(Clone, Debug)]
pub struct SourceToken {
    pub text: String,
    pub kind: TokenKind,
    /// 1-based line of the token's first character.
    pub line: u32,
    /// 1-based column (in chars) of the token's first character.
    pub column: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LexErrorKind {
    UnterminatedLiteral,
    UnterminatedComment,
}

#[derive(Clone, Debug)]
pub struct LexDiagnostic {
    pub kind: LexErrorKind,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Default)]
pub struct LexOutput {
    pub tokens: Vec<SourceToken>,
    pub diagnostics: Vec<LexDiagnostic>,
}

/// Reserved words of the language. `true`, `false` and `null` are lexed as
/// literals; contextual keywords (`var`, `record`, `yield`, ...) stay
/// identifiers.
pub const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

// Longest-match tables. Order within each table does not matter; the scanner
// always tries longer candidates first.
const OPERATORS: &[&str] = &[
    ">>>=", ">>>", ">>=", "<<=", "<<", ">>", "->", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "=", "<", ">", "!", "~", "?", ":", "+", "-",
    "*", "/", "&", "|", "^", "%",
];
const PUNCTUATION: &[&str] = &["...", "::", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@"];

struct Scanner<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    col: u32,
    out: LexOutput,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            col: 1,
            out: LexOutput::default(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn byte_at(&self, pos: usize) -> usize {
        self.chars.get(pos).map_or(self.src.len(), |&(b, _)| b)
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if let Some(&(_, c)) = self.chars.get(self.pos) {
                self.pos += 1;
                if c == '\n' {
                    self.line += 1;
                    self.col = 1;
                } else {
                    self.col += 1;
                }
            }
        }
    }

    fn emit(&mut self, start: usize, line: u32, col: u32, kind: TokenKind) {
        let text = self.src[self.byte_at(start)..self.byte_at(self.pos)].to_string();
        debug_assert!(!text.is_empty());
        self.out.tokens.push(SourceToken {
            text,
            kind,
            line,
            column: col,
        });
    }

    fn diagnostic(&mut self, kind: LexErrorKind, line: u32, column: u32) {
        self.out.diagnostics.push(LexDiagnostic { kind, line, column });
    }

    /// Consume up to (not including) the next newline.
    fn consume_rest_of_line(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            self.advance(1);
        }
    }

    fn run(mut self) -> LexOutput {
        while let Some(c) = self.peek(0) {
            let (start, line, col) = (self.pos, self.line, self.col);
            match c {
                _ if c.is_whitespace() => {
                    while matches!(self.peek(0), Some(w) if w.is_whitespace()) {
                        self.advance(1);
                    }
                    self.emit(start, line, col, TokenKind::Whitespace);
                }
                '/' if self.peek(1) == Some('/') => {
                    self.consume_rest_of_line();
                    self.emit(start, line, col, TokenKind::Comment);
                }
                '/' if self.peek(1) == Some('*') => {
                    self.advance(2);
                    let mut closed = false;
                    while let Some(k) = self.peek(0) {
                        if k == '*' && self.peek(1) == Some('/') {
                            self.advance(2);
                            closed = true;
                            break;
                        }
                        self.advance(1);
                    }
                    if !closed {
                        self.diagnostic(LexErrorKind::UnterminatedComment, line, col);
                    }
                    self.emit(start, line, col, TokenKind::Comment);
                }
                '"' if self.peek(1) == Some('"') && self.peek(2) == Some('"') => {
                    self.lex_text_block(start, line, col);
                }
                '"' => self.lex_quoted(start, line, col, '"'),
                '\'' => self.lex_quoted(start, line, col, '\''),
                _ if c.is_ascii_digit() => {
                    self.lex_number();
                    self.emit(start, line, col, TokenKind::Literal);
                }
                '.' if matches!(self.peek(1), Some(d) if d.is_ascii_digit()) => {
                    self.advance(1);
                    self.lex_number_fraction();
                    self.emit(start, line, col, TokenKind::Literal);
                }
                _ if c.is_alphabetic() || c == '_' || c == '$' => {
                    while matches!(self.peek(0), Some(k) if k.is_alphanumeric() || k == '_' || k == '$')
                    {
                        self.advance(1);
                    }
                    let word = &self.src[self.byte_at(start)..self.byte_at(self.pos)];
                    let kind = if is_keyword(word) {
                        TokenKind::Keyword
                    } else if word == "true" || word == "false" || word == "null" {
                        TokenKind::Literal
                    } else {
                        TokenKind::Identifier
                    };
                    self.emit(start, line, col, kind);
                }
                _ => {
                    if let Some(len) = self.match_table(PUNCTUATION) {
                        self.advance(len);
                        self.emit(start, line, col, TokenKind::Punctuation);
                    } else if let Some(len) = self.match_table(OPERATORS) {
                        self.advance(len);
                        self.emit(start, line, col, TokenKind::Operator);
                    } else {
                        // Not valid Java (stray `#`, `\`, ...); keep the byte
                        // so the round-trip invariant holds.
                        self.advance(1);
                        self.emit(start, line, col, TokenKind::Punctuation);
                    }
                }
            }
        }
        self.out
    }

    /// Longest match at the cursor against a table; returns length in chars.
    fn match_table(&self, table: &[&str]) -> Option<usize> {
        let mut best = 0usize;
        for cand in table {
            let n = cand.chars().count();
            if n <= best {
                continue;
            }
            let matches = cand
                .chars()
                .enumerate()
                .all(|(i, want)| self.peek(i) == Some(want));
            if matches {
                best = n;
            }
        }
        (best > 0).then_some(best)
    }

    fn lex_quoted(&mut self, start: usize, line: u32, col: u32, quote: char) {
        self.advance(1);
        loop {
            match self.peek(0) {
                Some('\\') => self.advance(2),
                Some(c) if c == quote => {
                    self.advance(1);
                    break;
                }
                Some('\n') | None => {
                    // Unterminated: the token covers the rest of the line and
                    // lexing resumes on the next one.
                    self.diagnostic(LexErrorKind::UnterminatedLiteral, line, col);
                    break;
                }
                Some(_) => self.advance(1),
            }
        }
        self.emit(start, line, col, TokenKind::Literal);
    }

    fn lex_text_block(&mut self, start: usize, line: u32, col: u32) {
        self.advance(3);
        let mut closed = false;
        while self.peek(0).is_some() {
            if self.peek(0) == Some('\\') {
                self.advance(2);
                continue;
            }
            if self.peek(0) == Some('"') && self.peek(1) == Some('"') && self.peek(2) == Some('"')
            {
                self.advance(3);
                closed = true;
                break;
            }
            self.advance(1);
        }
        if !closed {
            self.diagnostic(LexErrorKind::UnterminatedLiteral, line, col);
        }
        self.emit(start, line, col, TokenKind::Literal);
    }

    fn lex_number(&mut self) {
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x') | Some('X')) {
            self.advance(2);
            while matches!(self.peek(0), Some(c) if c.is_ascii_hexdigit() || c == '_') {
                self.advance(1);
            }
            if matches!(self.peek(0), Some('l') | Some('L')) {
                self.advance(1);
            }
            return;
        }
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('b') | Some('B')) {
            self.advance(2);
            while matches!(self.peek(0), Some('0') | Some('1') | Some('_')) {
                self.advance(1);
            }
            if matches!(self.peek(0), Some('l') | Some('L')) {
                self.advance(1);
            }
            return;
        }
        while matches!(self.peek(0), Some(c) if c.is_ascii_digit() || c == '_') {
            self.advance(1);
        }
        if self.peek(0) == Some('.') && matches!(self.peek(1), Some(d) if d.is_ascii_digit()) {
            self.advance(1);
            self.lex_number_fraction();
            return;
        }
        self.lex_number_tail();
    }

    /// Digits after a decimal point, then exponent/suffix.
    fn lex_number_fraction(&mut self) {
        while matches!(self.peek(0), Some(c) if c.is_ascii_digit() || c == '_') {
            self.advance(1);
        }
        self.lex_number_tail();
    }

    fn lex_number_tail(&mut self) {
        if matches!(self.peek(0), Some('e') | Some('E')) {
            let sign = matches!(self.peek(1), Some('+') | Some('-'));
            let digit_at = if sign { 2 } else { 1 };
            if matches!(self.peek(digit_at), Some(d) if d.is_ascii_digit()) {
                self.advance(if sign { 2 } else { 1 });
                while matches!(self.peek(0), Some(c) if c.is_ascii_digit() || c == '_') {
                    self.advance(1);
                }
            }
        }
        if matches!(
            self.peek(0),
            Some('f') | Some('F') | Some('d') | Some('D') | Some('l') | Some('L')
        ) {
            self.advance(1);
        }
    }
}

/// Lex one Java source file. Never fails; problems surface as diagnostics.
pub fn lex_java(source: &str) -> LexOutput {
    Scanner::new(source).run()
}
