//! Lexer shared by the SCF, SLC, and DLC textual formats.

use crate::diag::Loc;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Float(f32),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Float(v) => write!(f, "`{v}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpannedTok {
    pub tok: Tok,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{loc}: {message}")]
pub struct LexError {
    pub loc: Loc,
    pub message: String,
}

const PUNCTS2: &[&str] = &["+=", "==", "!=", "++", "->"];
const PUNCTS1: &[&str] = &[
    "(", ")", "{", "}", "[", "]", "<", ">", ",", ";", ":", "=", "+", "-", "*", "/", "%", "?",
    "@", ".", "!",
];

pub fn lex(src: &str) -> Result<Vec<SpannedTok>, LexError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    while i < bytes.len() {
        let loc = Loc::new(line, col);
        if bytes[i] >= 0x80 {
            // The grammar is ASCII; reject other input without slicing
            // through a multi-byte character.
            let c = src[i..].chars().next().unwrap();
            return Err(LexError {
                loc,
                message: format!("unexpected character `{c}`"),
            });
        }
        let c = bytes[i] as char;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
                col += 1;
            }
            out.push(SpannedTok {
                tok: Tok::Ident(src[start..i].to_string()),
                loc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
                col += 1;
            }
            // A float needs `.` followed by a digit, or an exponent.
            let mut is_float = false;
            if i + 1 < bytes.len() && bytes[i] == b'.' && (bytes[i + 1] as char).is_ascii_digit() {
                is_float = true;
                i += 1;
                col += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    is_float = true;
                    while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        j += 1;
                    }
                    col += (j - i) as u32;
                    i = j;
                }
            }
            let text = &src[start..i];
            if is_float {
                let v: f32 = text.parse().map_err(|_| LexError {
                    loc,
                    message: format!("invalid float literal `{text}`"),
                })?;
                out.push(SpannedTok {
                    tok: Tok::Float(v),
                    loc,
                });
            } else {
                let v: u64 = text.parse().map_err(|_| LexError {
                    loc,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                out.push(SpannedTok {
                    tok: Tok::Int(v),
                    loc,
                });
            }
            continue;
        }
        if i + 1 < bytes.len() && bytes[i + 1] < 0x80 {
            let two = &src[i..i + 2];
            if let Some(p) = PUNCTS2.iter().find(|p| **p == two) {
                out.push(SpannedTok {
                    tok: Tok::Punct(p),
                    loc,
                });
                i += 2;
                col += 2;
                continue;
            }
        }
        let one = &src[i..i + 1];
        if let Some(p) = PUNCTS1.iter().find(|p| **p == one) {
            out.push(SpannedTok {
                tok: Tok::Punct(p),
                loc,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(LexError {
            loc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(SpannedTok {
        tok: Tok::Eof,
        loc: Loc::new(line, col),
    });
    Ok(out)
}

/// Token cursor with one-token lookahead, shared by the three parsers.
pub struct Cursor {
    toks: Vec<SpannedTok>,
    pos: usize,
    depth: u32,
}

/// Nesting bound for recursive-descent productions (parens, blocks, loops).
pub const MAX_NESTING: u32 = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{loc}: {message}")]
pub struct ParseError {
    pub loc: Loc,
    pub message: String,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        ParseError {
            loc: e.loc,
            message: e.message,
        }
    }
}

impl Cursor {
    pub fn new(src: &str) -> Result<Cursor, ParseError> {
        Ok(Cursor {
            toks: lex(src)?,
            pos: 0,
            depth: 0,
        })
    }

    /// Enter a nested production; parsers bail out instead of overflowing
    /// the stack on hostile input. On parse errors the whole cursor is
    /// abandoned, so no matching `shallower` is needed on early returns.
    pub fn deeper(&mut self) -> Result<(), ParseError> {
        if self.depth >= MAX_NESTING {
            return self.err("nesting too deep");
        }
        self.depth += 1;
        Ok(())
    }

    pub fn shallower(&mut self) {
        self.depth = self.depth.saturating_sub(1);
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    pub fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            loc: self.loc(),
            message: message.into(),
        })
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.peek()))
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    pub fn expect_int(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Tok::Int(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            other => self.err(format!("expected integer literal, found {other}")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.err(format!("unexpected trailing input: {}", self.peek()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_idents_numbers_puncts() {
        let toks = lex("for(idx b = 0; b < n; b += 1) // c\n x[1,2] = 3.5;").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert!(kinds.contains(&Tok::Ident("for".into())));
        assert!(kinds.contains(&Tok::Punct("+=")));
        assert!(kinds.contains(&Tok::Float(3.5)));
        assert_eq!(*kinds.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn tracks_line_and_col() {
        let toks = lex("a\n  b").unwrap();
        assert_eq!(toks[0].loc, Loc::new(1, 1));
        assert_eq!(toks[1].loc, Loc::new(2, 3));
    }

    #[test]
    fn rejects_garbage() {
        assert!(lex("a # b").is_err());
    }
}
