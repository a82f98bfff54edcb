//! Source locations and diagnostics shared by the parsers and verifiers.

use std::fmt;

/// 1-based line/column position in a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(line: u32, col: u32) -> Loc {
        Loc { line, col }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// One verifier or parser finding. `path` points at the offending node,
/// e.g. `loop b/loop p/callback`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diag {
    pub path: String,
    pub message: String,
    pub loc: Option<Loc>,
}

impl Diag {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Diag {
        Diag {
            path: path.into(),
            message: message.into(),
            loc: None,
        }
    }

    pub fn at(loc: Loc, path: impl Into<String>, message: impl Into<String>) -> Diag {
        Diag {
            path: path.into(),
            message: message.into(),
            loc: Some(loc),
        }
    }
}

impl fmt::Display for Diag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(loc) = self.loc {
            write!(f, "{loc}: ")?;
        }
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Collection of diagnostics; empty means the check passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diags(pub Vec<Diag>);

impl Diags {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, d: Diag) {
        self.0.push(d);
    }

    pub fn into_result(self) -> Result<(), Diags> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for Diags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diags {}
