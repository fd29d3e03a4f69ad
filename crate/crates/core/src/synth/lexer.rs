//! Tokenizer for the restricted kernel dialect.
//!
//! Comments, string literals and preprocessor lines are kept as tokens with
//! byte spans so that renaming can splice identifiers without touching
//! anything else in the text.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    Comment,
    Preprocessor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    /// Tokens the parser cares about.
    pub fn is_code(&self) -> bool {
        !matches!(self.kind, TokenKind::Comment | TokenKind::Preprocessor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

const PUNCTS: [&str; 31] = [
    "<<<", ">>>", "<<=", ">>=", "::", "->", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "==", "!=",
    "<=", ">=", "&&", "||", "<<", ">>", "{", "}", "(", ")", "[", "]", ";",
];

const SINGLE: &str = "+-*/%=<>!&|^~?:,.#";

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        let column = i - line_start + 1;
        let start = i;

        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }

        let kind;
        if c == b'#' && at_line_start {
            // preprocessor directive runs to end of line, honouring continuations
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    i += 2;
                    line += 1;
                    line_start = i;
                } else {
                    i += 1;
                }
            }
            kind = TokenKind::Preprocessor;
        } else if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            kind = TokenKind::Comment;
        } else if src[i..].starts_with("/*") {
            let Some(end) = src[i + 2..].find("*/") else {
                return Err(LexError { message: "unterminated block comment".into(), line, column });
            };
            let stop = i + 2 + end + 2;
            for (off, b) in bytes[i..stop].iter().enumerate() {
                if *b == b'\n' {
                    line += 1;
                    line_start = i + off + 1;
                }
            }
            i = stop;
            kind = TokenKind::Comment;
        } else if c == b'"' || c == b'\'' {
            let quote = c;
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(LexError { message: "unterminated literal".into(), line, column });
                    }
                    Some(b'\\') => i += 2,
                    Some(&b) if b == quote => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            kind = if quote == b'"' { TokenKind::Str } else { TokenKind::Char };
        } else if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] >= 0x80) {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() {
                let b = bytes[i];
                let exp_sign = (b == b'+' || b == b'-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                    && !src[start..i].starts_with("0x");
                if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || exp_sign {
                    i += 1;
                } else if b == b'\'' && bytes.get(i + 1).is_some_and(u8::is_ascii_alphanumeric) {
                    // digit separator: 1'000'000
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            i += p.len();
            kind = TokenKind::Punct;
        } else if SINGLE.as_bytes().contains(&c) {
            i += 1;
            kind = TokenKind::Punct;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(LexError { message: format!("unexpected character `{ch}`"), line, column });
        }

        at_line_start = false;
        tokens.push(Token { kind, span: start..i, line, column });
    }
    Ok(tokens)
}
