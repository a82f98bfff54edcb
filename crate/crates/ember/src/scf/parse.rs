//! Recursive-descent parser for the textual front-end language.
//!
//! ```text
//! fn     := 'void' NAME '(' param (',' param)* ')' '{' stmt* '}'
//! param  := NAME ':' ('mref' '<' dim ('x' dim)* 'x' elemty '>' | 'idx')
//! stmt   := 'for' '(' 'idx' V '=' expr ';' V '<' expr ';' (V '+=' INT | V '++') ')' '{' stmt* '}'
//!         | elemty NAME '=' expr ';'
//!         | NAME '[' expr (',' expr)* ']' ('=' | '+=') expr ';'
//! ```
//! `m[i] += e` desugars to `m[i] = m[i] + e`. Line comments start with `//`.

use super::{Param, ScfExpr, ScfFunction, ScfStmt};
use crate::lex::{Cursor, ParseError, Tok};
use crate::mem::{Dim, MemRef};
use crate::types::{BinOp, ElemType, Lit};

pub fn parse_scf(src: &str) -> Result<ScfFunction, ParseError> {
    let mut c = Cursor::new(src)?;
    c.expect_kw("void")?;
    let name = c.expect_ident()?;
    c.expect_punct("(")?;
    let mut params = Vec::new();
    if !c.eat_punct(")") {
        loop {
            params.push(parse_param(&mut c)?);
            if c.eat_punct(")") {
                break;
            }
            c.expect_punct(",")?;
        }
    }
    c.expect_punct("{")?;
    let body = parse_block(&mut c)?;
    c.expect_eof()?;
    Ok(ScfFunction { name, params, body })
}

fn parse_elem_type(c: &mut Cursor) -> Result<ElemType, ParseError> {
    let id = c.expect_ident()?;
    match id.as_str() {
        "idx" | "index" => Ok(ElemType::Index),
        "i32" => Ok(ElemType::I32),
        "f32" => Ok(ElemType::F32),
        other => c.err(format!("unknown element type `{other}`")),
    }
}

fn parse_param(c: &mut Cursor) -> Result<Param, ParseError> {
    let name = c.expect_ident()?;
    c.expect_punct(":")?;
    if c.eat_kw("mref") {
        c.expect_punct("<")?;
        let mut dims = Vec::new();
        let elem;
        loop {
            match c.peek().clone() {
                Tok::Punct("?") => {
                    c.bump();
                    dims.push(Dim::Dynamic);
                }
                Tok::Int(n) => {
                    c.bump();
                    dims.push(Dim::Static(n));
                }
                _ => return c.err("expected dimension (`?` or integer)"),
            }
            c.expect_kw("x")?;
            // The token after `x` is either another dim or the element type.
            match c.peek() {
                Tok::Punct("?") | Tok::Int(_) => continue,
                _ => {
                    elem = parse_elem_type(c)?;
                    break;
                }
            }
        }
        c.expect_punct(">")?;
        Ok(Param::Mem(MemRef {
            name,
            elem,
            shape: dims,
        }))
    } else {
        let id = c.expect_ident()?;
        if id == "idx" || id == "index" {
            Ok(Param::Scalar(name))
        } else {
            c.err(format!(
                "parameter `{name}`: expected `mref<...>` or `idx`, found `{id}`"
            ))
        }
    }
}

fn parse_block(c: &mut Cursor) -> Result<Vec<ScfStmt>, ParseError> {
    let mut stmts = Vec::new();
    while !c.eat_punct("}") {
        stmts.push(parse_stmt(c)?);
    }
    Ok(stmts)
}

fn parse_stmt(c: &mut Cursor) -> Result<ScfStmt, ParseError> {
    let loc = c.loc();
    match c.peek().clone() {
        Tok::Ident(id) if id == "for" => {
            c.bump();
            c.expect_punct("(")?;
            let vty = parse_elem_type(c)?;
            if vty != ElemType::Index {
                return c.err("loop induction variables must be index-typed");
            }
            let var = c.expect_ident()?;
            c.expect_punct("=")?;
            let lo = parse_expr(c)?;
            c.expect_punct(";")?;
            let var2 = c.expect_ident()?;
            if var2 != var {
                return c.err(format!("loop condition must test `{var}`, found `{var2}`"));
            }
            c.expect_punct("<")?;
            let hi = parse_expr(c)?;
            c.expect_punct(";")?;
            let var3 = c.expect_ident()?;
            if var3 != var {
                return c.err(format!("loop step must update `{var}`, found `{var3}`"));
            }
            let step = if c.eat_punct("++") {
                1
            } else if c.eat_punct("+=") {
                let s = c.expect_int()?;
                if s == 0 {
                    return c.err("stride must be a positive literal");
                }
                s
            } else {
                return c.err("stride must be a positive literal (`V += N` or `V++`)");
            };
            c.expect_punct(")")?;
            c.expect_punct("{")?;
            c.deeper()?;
            let body = parse_block(c)?;
            c.shallower();
            Ok(ScfStmt::For {
                var,
                lo,
                hi,
                step,
                body,
                loc,
            })
        }
        Tok::Ident(id) if id == "idx" || id == "index" || id == "i32" || id == "f32" => {
            let ty = parse_elem_type(c)?;
            let var = c.expect_ident()?;
            c.expect_punct("=")?;
            let value = parse_expr(c)?;
            c.expect_punct(";")?;
            Ok(ScfStmt::Assign {
                ty,
                var,
                value,
                loc,
            })
        }
        Tok::Ident(_) => {
            let mem = c.expect_ident()?;
            c.expect_punct("[")?;
            let mut idx = vec![parse_expr(c)?];
            while c.eat_punct(",") {
                idx.push(parse_expr(c)?);
            }
            c.expect_punct("]")?;
            let accumulate = if c.eat_punct("+=") {
                true
            } else {
                c.expect_punct("=")?;
                false
            };
            let rhs = parse_expr(c)?;
            c.expect_punct(";")?;
            let value = if accumulate {
                ScfExpr::bin(
                    BinOp::Add,
                    ScfExpr::Load {
                        mem: mem.clone(),
                        idx: idx.clone(),
                        loc,
                    },
                    rhs,
                )
            } else {
                rhs
            };
            Ok(ScfStmt::Store {
                mem,
                idx,
                value,
                loc,
            })
        }
        other => c.err(format!("expected statement, found {other}")),
    }
}

pub(super) fn parse_expr(c: &mut Cursor) -> Result<ScfExpr, ParseError> {
    let mut lhs = parse_term(c)?;
    loop {
        let op = if c.eat_punct("+") {
            BinOp::Add
        } else if c.eat_punct("-") {
            BinOp::Sub
        } else {
            return Ok(lhs);
        };
        let rhs = parse_term(c)?;
        lhs = ScfExpr::bin(op, lhs, rhs);
    }
}

fn parse_term(c: &mut Cursor) -> Result<ScfExpr, ParseError> {
    let mut lhs = parse_factor(c)?;
    loop {
        let op = if c.eat_punct("*") {
            BinOp::Mul
        } else if c.eat_punct("/") {
            BinOp::Div
        } else if c.eat_punct("%") {
            BinOp::Rem
        } else {
            return Ok(lhs);
        };
        let rhs = parse_factor(c)?;
        lhs = ScfExpr::bin(op, lhs, rhs);
    }
}

fn parse_factor(c: &mut Cursor) -> Result<ScfExpr, ParseError> {
    let loc = c.loc();
    match c.peek().clone() {
        Tok::Int(v) => {
            c.bump();
            Ok(ScfExpr::Const(Lit::Int(v)))
        }
        Tok::Float(v) => {
            c.bump();
            Ok(ScfExpr::Const(Lit::F32(v)))
        }
        Tok::Punct("(") => {
            c.bump();
            c.deeper()?;
            let e = parse_expr(c)?;
            c.shallower();
            c.expect_punct(")")?;
            Ok(e)
        }
        Tok::Ident(_) => {
            let name = c.expect_ident()?;
            if c.eat_punct("[") {
                let mut idx = vec![parse_expr(c)?];
                while c.eat_punct(",") {
                    idx.push(parse_expr(c)?);
                }
                c.expect_punct("]")?;
                Ok(ScfExpr::Load {
                    mem: name,
                    idx,
                    loc,
                })
            } else {
                Ok(ScfExpr::Var(name))
            }
        }
        other => c.err(format!("expected expression, found {other}")),
    }
}
