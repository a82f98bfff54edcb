//! Parser for the textual SLC/SLCV form produced by `print_slc`.

use super::*;
use crate::cpu::{self, VarCtx};
use crate::lex::{Cursor, ParseError, Tok};
use crate::mem::{Dim, MemRef};
use crate::scf::Param;
use crate::types::{BinOp, ElemType, ValType};
use std::collections::HashSet;

pub fn parse_slc(src: &str) -> Result<SlcFunction, ParseError> {
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
    let mut px = Pcx {
        streams: HashSet::new(),
        bufs: Vec::new(),
        carried: Vec::new(),
    };
    let items = parse_items(&mut c, &mut px, &params)?;
    c.expect_eof()?;
    Ok(SlcFunction {
        name,
        params,
        items,
    })
}

struct Pcx {
    streams: HashSet<String>,
    /// (name, elem, vlen) of visible buffer streams.
    bufs: Vec<(String, ElemType, u32)>,
    carried: Vec<String>,
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
                _ => return c.err("expected dimension"),
            }
            c.expect_kw("x")?;
            match c.peek() {
                Tok::Punct("?") | Tok::Int(_) => continue,
                _ => {
                    elem = cpu::parse_elem(c)?;
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
        let t = cpu::parse_elem(c)?;
        if t != ElemType::Index {
            return c.err("scalar parameters are index-typed");
        }
        Ok(Param::Scalar(name))
    }
}

/// Parse items until the closing `}` of the current block.
fn parse_items(c: &mut Cursor, px: &mut Pcx, params: &[Param]) -> Result<Vec<SlcItem>, ParseError> {
    let mut items = Vec::new();
    while !c.eat_punct("}") {
        items.push(parse_item(c, px, params)?);
    }
    Ok(items)
}

fn is_scalar_param(params: &[Param], name: &str) -> bool {
    params
        .iter()
        .any(|p| matches!(p, Param::Scalar(s) if s == name))
}

fn parse_item(c: &mut Cursor, px: &mut Pcx, params: &[Param]) -> Result<SlcItem, ParseError> {
    match c.peek().clone() {
        Tok::Ident(id) if id == "str" => parse_decl(c, px, params),
        Tok::Ident(id) if id == "slc" || id == "slcv" => {
            let vectorized = id == "slcv";
            c.bump();
            c.expect_punct(".")?;
            let kw = c.expect_ident()?;
            match kw.as_str() {
                "for" => parse_loop(c, px, params, vectorized),
                "callback" => parse_callback(c, px, params),
                "push" => {
                    c.expect_punct("(")?;
                    let buf = c.expect_ident()?;
                    c.expect_punct(",")?;
                    let src = c.expect_ident()?;
                    c.expect_punct(")")?;
                    c.expect_punct(";")?;
                    Ok(SlcItem::Push { buf, src })
                }
                "store_str" => {
                    let width = if c.eat_punct("<") {
                        let w = c.expect_int()? as u32;
                        c.expect_punct(">")?;
                        w
                    } else {
                        1
                    };
                    c.expect_punct("(")?;
                    let mem = c.expect_ident()?;
                    c.expect_punct("[")?;
                    let mut idx = vec![parse_index_operand(c, px, params)?];
                    while c.eat_punct(",") {
                        // Lookahead: the value name follows the `]`.
                        idx.push(parse_index_operand(c, px, params)?);
                    }
                    c.expect_punct("]")?;
                    c.expect_punct(",")?;
                    let value = c.expect_ident()?;
                    let mask = if c.eat_punct(",") {
                        let m = c.expect_ident()?;
                        if m == "_" {
                            None
                        } else {
                            Some(m)
                        }
                    } else {
                        None
                    };
                    c.expect_punct(")")?;
                    c.expect_punct(";")?;
                    Ok(SlcItem::StoreStream {
                        mem,
                        idx,
                        value,
                        width,
                        mask,
                    })
                }
                other => c.err(format!("unknown construct `slc.{other}`")),
            }
        }
        other => c.err(format!("expected SLC item, found {other}")),
    }
}

fn parse_operand(c: &mut Cursor, px: &Pcx, params: &[Param]) -> Result<Operand, ParseError> {
    match c.peek().clone() {
        Tok::Int(v) => {
            c.bump();
            Ok(Operand::Lit(v))
        }
        Tok::Ident(_) => {
            let name = c.expect_ident()?;
            if px.streams.contains(&name) {
                Ok(Operand::Stream(name))
            } else if is_scalar_param(params, &name) {
                Ok(Operand::Var(name))
            } else {
                c.err(format!("`{name}` is neither a stream nor a scalar parameter"))
            }
        }
        other => c.err(format!("expected operand, found {other}")),
    }
}

fn parse_index_operand(
    c: &mut Cursor,
    px: &Pcx,
    params: &[Param],
) -> Result<IndexOperand, ParseError> {
    let base = parse_operand(c, px, params)?;
    let offset = if c.eat_punct("+") {
        c.expect_int()?
    } else {
        0
    };
    Ok(IndexOperand { base, offset })
}

fn parse_decl(c: &mut Cursor, px: &mut Pcx, params: &[Param]) -> Result<SlcItem, ParseError> {
    c.expect_kw("str")?;
    // Buffer declaration: `str<vec<W x T>> name = slcv.buf_str();`
    if c.eat_punct("<") {
        c.expect_kw("vec")?;
        c.expect_punct("<")?;
        let vlen = c.expect_int()? as u32;
        c.expect_kw("x")?;
        let elem = cpu::parse_elem(c)?;
        c.expect_punct(">")?;
        c.expect_punct(">")?;
        let name = c.expect_ident()?;
        c.expect_punct("=")?;
        let ns = c.expect_ident()?;
        if ns != "slcv" && ns != "slc" {
            return c.err("expected `slcv.buf_str()`");
        }
        c.expect_punct(".")?;
        c.expect_kw("buf_str")?;
        c.expect_punct("(")?;
        c.expect_punct(")")?;
        c.expect_punct(";")?;
        px.streams.insert(name.clone());
        px.bufs.push((name.clone(), elem, vlen));
        return Ok(SlcItem::Decl(StreamDecl {
            name,
            kind: StreamKind::Buf { elem, vlen },
        }));
    }
    let name = c.expect_ident()?;
    c.expect_punct("=")?;
    let ns = c.expect_ident()?;
    if ns != "slc" && ns != "slcv" {
        return c.err("expected `slc.` or `slcv.` stream expression");
    }
    c.expect_punct(".")?;
    let kw = c.expect_ident()?;
    let width = if c.eat_punct("<") {
        let w = c.expect_int()? as u32;
        c.expect_punct(">")?;
        w
    } else {
        1
    };
    let kind = match kw.as_str() {
        "mem_str" => {
            c.expect_punct("(")?;
            let mem = c.expect_ident()?;
            c.expect_punct("[")?;
            let mut idx = vec![parse_index_operand(c, px, params)?];
            while c.eat_punct(",") {
                idx.push(parse_index_operand(c, px, params)?);
            }
            c.expect_punct("]")?;
            let mask = if c.eat_punct(",") {
                Some(c.expect_ident()?)
            } else {
                None
            };
            c.expect_punct(")")?;
            let hint = parse_hint(c)?;
            c.expect_punct(";")?;
            StreamKind::Load {
                mem,
                idx,
                width,
                mask,
                hint,
            }
        }
        "alu_str" => {
            c.expect_punct("(")?;
            let op = parse_alu_op(c)?;
            c.expect_punct(",")?;
            let lhs = parse_operand(c, px, params)?;
            c.expect_punct(",")?;
            let rhs = parse_operand(c, px, params)?;
            c.expect_punct(")")?;
            c.expect_punct(";")?;
            StreamKind::Alu {
                op,
                lhs,
                rhs,
                width,
            }
        }
        other => return c.err(format!("unknown stream expression `{other}`")),
    };
    px.streams.insert(name.clone());
    Ok(SlcItem::Decl(StreamDecl { name, kind }))
}

fn parse_alu_op(c: &mut Cursor) -> Result<BinOp, ParseError> {
    for sym in ["+", "-", "*", "/", "%"] {
        if c.eat_punct(sym) {
            return Ok(BinOp::from_symbol(sym).unwrap());
        }
    }
    c.err("expected ALU operator")
}

fn parse_hint(c: &mut Cursor) -> Result<Option<LoadHint>, ParseError> {
    if !c.eat_punct("@") {
        return Ok(None);
    }
    c.expect_kw("hint")?;
    c.expect_punct("(")?;
    let level = match c.expect_ident()?.as_str() {
        "L1" => CacheLevel::L1,
        "L2" => CacheLevel::L2,
        "LLC" => CacheLevel::Llc,
        other => return c.err(format!("unknown cache level `{other}`")),
    };
    c.expect_punct(",")?;
    let temporal = match c.expect_ident()?.as_str() {
        "temporal" => true,
        "nontemporal" => false,
        other => return c.err(format!("expected temporal/nontemporal, found `{other}`")),
    };
    c.expect_punct(")")?;
    Ok(Some(LoadHint {
        cache_level: level,
        temporal,
    }))
}

fn parse_range(c: &mut Cursor, px: &Pcx, params: &[Param]) -> Result<RangeRef, ParseError> {
    match parse_operand(c, px, params)? {
        Operand::Stream(s) => Ok(RangeRef::Stream(s)),
        Operand::Var(v) => Ok(RangeRef::Var(v)),
        Operand::Lit(v) => Ok(RangeRef::Lit(v)),
    }
}

fn parse_loop(
    c: &mut Cursor,
    px: &mut Pcx,
    params: &[Param],
    vectorized: bool,
) -> Result<SlcItem, ParseError> {
    let vlen = if vectorized {
        c.expect_punct("<")?;
        let v = c.expect_int()? as u32;
        c.expect_punct(">")?;
        Some(v)
    } else {
        None
    };
    c.expect_punct("(")?;
    let (stream, mask) = if vectorized {
        c.expect_punct("(")?;
        c.expect_kw("str")?;
        let s = c.expect_ident()?;
        c.expect_punct(",")?;
        c.expect_kw("str")?;
        let m = c.expect_ident()?;
        c.expect_punct(")")?;
        (s, Some(m))
    } else {
        c.expect_kw("str")?;
        (c.expect_ident()?, None)
    };
    c.expect_kw("from")?;
    let lo = parse_range(c, px, params)?;
    c.expect_kw("to")?;
    let hi = parse_range(c, px, params)?;
    let step = if c.eat_kw("step") { c.expect_int()? } else { 1 };
    c.expect_punct(")")?;
    let mut carried = Vec::new();
    if c.eat_punct("(") {
        loop {
            let t = cpu::parse_elem(c)?;
            if t != ElemType::Index {
                return c.err("carried variables are index-typed");
            }
            let name = c.expect_ident()?;
            c.expect_punct("=")?;
            let init = c.expect_int()?;
            carried.push(CarriedVar {
                name: name.clone(),
                init,
            });
            px.carried.push(name);
            if c.eat_punct(")") {
                break;
            }
            c.expect_punct(",")?;
        }
    }
    c.expect_punct("{")?;
    px.streams.insert(stream.clone());
    if let Some(m) = &mask {
        px.streams.insert(m.clone());
    }
    c.deeper()?;
    let items = parse_items(c, px, params)?;
    c.shallower();
    Ok(SlcItem::Loop(SlcLoop {
        stream,
        mask,
        vlen,
        lo,
        hi,
        step,
        carried,
        items,
    }))
}

fn parse_callback(c: &mut Cursor, px: &mut Pcx, params: &[Param]) -> Result<SlcItem, ParseError> {
    c.expect_punct("{")?;
    let mut tovals = Vec::new();
    let mut stmts = Vec::new();
    let mut ctx = VarCtx::default();
    for p in params {
        if let Param::Scalar(s) = p {
            ctx.declare(s, ValType::Scalar(ElemType::Index));
        }
    }
    for cv in &px.carried {
        ctx.declare(cv, ValType::Scalar(ElemType::Index));
    }
    let mut in_tovals = true;
    while !c.eat_punct("}") {
        // A conversion line is `TY NAME = slc(.v)?.to_val...`.
        let is_toval_ahead = {
            matches!(c.peek(), Tok::Ident(s)
                if matches!(s.as_str(), "idx" | "index" | "i32" | "f32" | "vec" | "vmask" | "chunks"))
        };
        if is_toval_ahead {
            // Parse the type and name, then decide by the RHS head.
            let ty = cpu::parse_val_type(c)?;
            let var = c.expect_ident()?;
            c.expect_punct("=")?;
            let is_toval = matches!(c.peek(), Tok::Ident(s) if s == "slc" || s == "slcv");
            if is_toval {
                if !in_tovals {
                    return c.err("stream-to-value conversions must precede statements");
                }
                c.bump();
                c.expect_punct(".")?;
                c.expect_kw("to_val")?;
                let explicit_w = if c.eat_punct("<") {
                    let w = c.expect_int()? as u32;
                    c.expect_punct(">")?;
                    Some(w)
                } else {
                    None
                };
                c.expect_punct("(")?;
                let stream = c.expect_ident()?;
                c.expect_punct(")")?;
                let lane0 = if c.eat_punct("[") {
                    let l = c.expect_int()?;
                    if l != 0 {
                        return c.err("only lane 0 extraction is supported in conversions");
                    }
                    c.expect_punct("]")?;
                    true
                } else {
                    false
                };
                let padded = if c.eat_punct("@") {
                    c.expect_kw("pad")?;
                    c.expect_punct("(")?;
                    let w = c.expect_int()? as u32;
                    c.expect_punct(")")?;
                    Some(w)
                } else {
                    None
                };
                c.expect_punct(";")?;
                let kind = if lane0 {
                    ToValKind::Lane0
                } else if explicit_w.is_some() {
                    ToValKind::Vector
                } else {
                    match ty {
                        ValType::Mask(_) => ToValKind::MaskRead,
                        ValType::Chunks(_, _) => ToValKind::Buffer,
                        ValType::Vec(_, _) => ToValKind::Vector,
                        ValType::Scalar(_) => ToValKind::Scalar,
                    }
                };
                ctx.declare(&var, ty);
                tovals.push(ToVal {
                    var,
                    ty,
                    stream,
                    kind,
                    padded,
                });
                continue;
            }
            // Ordinary assignment statement.
            in_tovals = false;
            let value = cpu::parse_expr(c, &ctx)?;
            c.expect_punct(";")?;
            ctx.declare(&var, ty);
            stmts.push(crate::cpu::CpuStmt::Assign { ty, var, value });
            continue;
        }
        in_tovals = false;
        stmts.push(cpu::parse_stmt(c, &mut ctx, false)?);
    }
    Ok(SlcItem::Call(Callback { tovals, stmts }))
}
