//! Textual form of decoupled programs, round-trippable through `parse_dlc`.

use super::*;
use crate::cpu;
use crate::lex::{Cursor, ParseError, Tok};
use crate::mem::Dim;
use crate::scf::Param;
use crate::types::ValType;
use std::collections::HashMap;
use std::fmt::Write as _;

pub fn print_dlc(p: &DlcProgram) -> String {
    let mut out = String::new();
    write!(out, "dlc {}(", p.name).unwrap();
    for (i, param) in p.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match param {
            Param::Mem(m) => {
                write!(out, "{}: mref<", m.name).unwrap();
                for d in &m.shape {
                    write!(out, "{d} x ").unwrap();
                }
                write!(out, "{}>", m.elem).unwrap();
            }
            Param::Scalar(s) => write!(out, "{s}: idx").unwrap(),
        }
    }
    out.push_str(") {\n");
    out.push_str("  access {\n");
    // Units interleave with the streams they own, in declaration order.
    for u in &p.access.units {
        if u.width > 1 {
            writeln!(
                out,
                "    tu {} = loop_tr<{}>({}, {}, {});",
                u.name,
                u.width,
                operand_str(p, &u.lo),
                operand_str(p, &u.ub),
                u.stride
            )
            .unwrap();
        } else {
            writeln!(
                out,
                "    tu {} = loop_tr({}, {}, {});",
                u.name,
                operand_str(p, &u.lo),
                operand_str(p, &u.ub),
                u.stride
            )
            .unwrap();
        }
        for s in p.access.streams.iter().filter(|s| s.level == u.id) {
            print_stream(&mut out, p, s, u);
        }
    }
    for m in &p.access.marshals {
        match m {
            MarshalOp::Push {
                source,
                tu,
                event,
                width,
            } => {
                let src = match source {
                    PushSource::Stream(s) => s.clone(),
                    PushSource::IteBase(t) => format!("{}.ite", p.access.units[*t].name),
                };
                let src_width = match source {
                    PushSource::Stream(s) => p.access.stream(s).map(|d| d.width).unwrap_or(1),
                    PushSource::IteBase(_) => 1,
                };
                if *width != src_width {
                    writeln!(
                        out,
                        "    push_op<{width}>({src}, {}, {});",
                        p.access.units[*tu].name,
                        event.name()
                    )
                    .unwrap();
                } else {
                    writeln!(
                        out,
                        "    push_op({src}, {}, {});",
                        p.access.units[*tu].name,
                        event.name()
                    )
                    .unwrap();
                }
            }
            MarshalOp::Trigger { tu, event, at } => {
                if at == event {
                    writeln!(out, "    callback({}, {});", p.access.units[*tu].name, event.name())
                        .unwrap();
                } else {
                    writeln!(
                        out,
                        "    callback({}, {}) @ {};",
                        p.access.units[*tu].name,
                        event.name(),
                        at.name()
                    )
                    .unwrap();
                }
            }
            MarshalOp::Store {
                mem,
                index,
                value,
                tu,
                width,
            } => {
                let idx = index
                    .iter()
                    .map(|o| operand_str(p, o))
                    .collect::<Vec<_>>()
                    .join(" + ");
                if *width > 1 {
                    writeln!(
                        out,
                        "    {}.store_str<{width}>({mem}, {idx}, {value});",
                        p.access.units[*tu].name
                    )
                    .unwrap();
                } else {
                    writeln!(
                        out,
                        "    {}.store_str({mem}, {idx}, {value});",
                        p.access.units[*tu].name
                    )
                    .unwrap();
                }
            }
        }
    }
    out.push_str("  }\n");
    out.push_str("  execute {\n");
    for (name, init) in &p.execute.locals {
        writeln!(out, "    idx {name} = {init};").unwrap();
    }
    out.push_str("    while(tkn = ctrlQ.pop() != done) {\n");
    for (k, arm) in p.execute.arms.iter().enumerate() {
        let kw = if k == 0 { "if" } else { "else if" };
        writeln!(
            out,
            "      {kw}(tkn == {}.{}) {{",
            p.access.units[arm.token.tu].name,
            arm.token.event.name()
        )
        .unwrap();
        let mut body = String::new();
        cpu::print_stmts(&mut body, &arm.body, 4);
        out.push_str(&body);
        out.push_str("      }\n");
    }
    out.push_str("    }\n");
    out.push_str("  }\n");
    out.push_str("}\n");
    out
}

fn operand_str(p: &DlcProgram, o: &DlcOperand) -> String {
    match o {
        DlcOperand::Stream(s) => s.clone(),
        DlcOperand::Ite(t) => format!("{}.ite", p.access.units[*t].name),
        DlcOperand::Lit(v) => v.to_string(),
        DlcOperand::Scalar(s) => s.clone(),
        DlcOperand::DimSize(m, d) => format!("dim({m}, {d})"),
    }
}

fn print_stream(out: &mut String, p: &DlcProgram, s: &DlcStream, u: &TraversalUnit) {
    let w = if s.width > 1 {
        format!("<{}>", s.width)
    } else {
        String::new()
    };
    match &s.kind {
        DlcStreamKind::Mem { mem, index, hint } => {
            let idx = index
                .iter()
                .map(|o| operand_str(p, o))
                .collect::<Vec<_>>()
                .join(" + ");
            let h = match hint {
                Some(h) => format!(
                    " @ hint({}, {})",
                    h.cache_level,
                    if h.temporal { "temporal" } else { "nontemporal" }
                ),
                None => String::new(),
            };
            writeln!(out, "    str {} = {}.mem_str{w}({mem}, {idx}){h};", s.name, u.name).unwrap();
        }
        DlcStreamKind::Alu { op, lhs, rhs } => {
            writeln!(
                out,
                "    str {} = {}.alu_str{w}({op}, {}, {});",
                s.name,
                u.name,
                operand_str(p, lhs),
                operand_str(p, rhs)
            )
            .unwrap();
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

pub fn parse_dlc(src: &str) -> Result<DlcProgram, ParseError> {
    let mut c = Cursor::new(src)?;
    c.expect_kw("dlc")?;
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
    c.expect_kw("access")?;
    c.expect_punct("{")?;
    let mut px = Pcx {
        units: Vec::new(),
        streams: Vec::new(),
        marshals: Vec::new(),
        unit_ids: HashMap::new(),
        stream_widths: HashMap::new(),
        params: params.clone(),
    };
    while !c.eat_punct("}") {
        parse_access_item(&mut c, &mut px)?;
    }
    c.expect_kw("execute")?;
    c.expect_punct("{")?;
    let mut locals = Vec::new();
    // Local declarations precede the token loop.
    while matches!(c.peek(), Tok::Ident(s) if s == "idx" || s == "index") {
        c.bump();
        let name = c.expect_ident()?;
        c.expect_punct("=")?;
        let init = c.expect_int()?;
        c.expect_punct(";")?;
        locals.push((name, init));
    }
    c.expect_kw("while")?;
    c.expect_punct("(")?;
    c.expect_kw("tkn")?;
    c.expect_punct("=")?;
    c.expect_kw("ctrlQ")?;
    c.expect_punct(".")?;
    c.expect_kw("pop")?;
    c.expect_punct("(")?;
    c.expect_punct(")")?;
    c.expect_punct("!=")?;
    c.expect_kw("done")?;
    c.expect_punct(")")?;
    c.expect_punct("{")?;
    let mut arms = Vec::new();
    let mut first = true;
    loop {
        if c.eat_punct("}") {
            break;
        }
        if first {
            c.expect_kw("if")?;
            first = false;
        } else {
            c.expect_kw("else")?;
            c.expect_kw("if")?;
        }
        c.expect_punct("(")?;
        c.expect_kw("tkn")?;
        c.expect_punct("==")?;
        let uname = c.expect_ident()?;
        c.expect_punct(".")?;
        let ev = parse_event(&mut c)?;
        c.expect_punct(")")?;
        let tu = *px
            .unit_ids
            .get(&uname)
            .ok_or_else(|| ParseError {
                loc: c.loc(),
                message: format!("unknown traversal unit `{uname}`"),
            })?;
        let mut ctx = cpu::VarCtx::default();
        for p in &params {
            if let Param::Scalar(s) = p {
                ctx.declare(s, ValType::Scalar(crate::types::ElemType::Index));
            }
        }
        for (l, _) in &locals {
            ctx.declare(l, ValType::Scalar(crate::types::ElemType::Index));
        }
        let body = cpu::parse_block(&mut c, &mut ctx, true)?;
        arms.push(Arm {
            token: Token { tu, event: ev },
            body,
        });
    }
    c.expect_punct("}")?; // end execute
    c.expect_punct("}")?; // end program
    c.expect_eof()?;
    Ok(DlcProgram {
        name,
        params,
        access: AccessProgram {
            units: px.units,
            streams: px.streams,
            marshals: px.marshals,
        },
        execute: ExecuteProgram { locals, arms },
    })
}

struct Pcx {
    units: Vec<TraversalUnit>,
    streams: Vec<DlcStream>,
    marshals: Vec<MarshalOp>,
    unit_ids: HashMap<String, usize>,
    stream_widths: HashMap<String, u32>,
    params: Vec<Param>,
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
        Ok(Param::Mem(crate::mem::MemRef {
            name,
            elem,
            shape: dims,
        }))
    } else {
        let t = cpu::parse_elem(c)?;
        if t != crate::types::ElemType::Index {
            return c.err("scalar parameters are index-typed");
        }
        Ok(Param::Scalar(name))
    }
}

fn parse_event(c: &mut Cursor) -> Result<Event, ParseError> {
    match c.expect_ident()?.as_str() {
        "beg" => Ok(Event::Beg),
        "ite" => Ok(Event::Ite),
        "end" => Ok(Event::End),
        other => c.err(format!("unknown traversal event `{other}`")),
    }
}

fn parse_operand(c: &mut Cursor, px: &Pcx) -> Result<DlcOperand, ParseError> {
    match c.peek().clone() {
        Tok::Int(v) => {
            c.bump();
            Ok(DlcOperand::Lit(v))
        }
        Tok::Ident(id) if id == "dim" => {
            c.bump();
            c.expect_punct("(")?;
            let mem = c.expect_ident()?;
            c.expect_punct(",")?;
            let d = c.expect_int()? as usize;
            c.expect_punct(")")?;
            Ok(DlcOperand::DimSize(mem, d))
        }
        Tok::Ident(_) => {
            let name = c.expect_ident()?;
            if let Some(id) = px.unit_ids.get(&name) {
                c.expect_punct(".")?;
                c.expect_kw("ite")?;
                return Ok(DlcOperand::Ite(*id));
            }
            if px.stream_widths.contains_key(&name) {
                return Ok(DlcOperand::Stream(name));
            }
            if px
                .params
                .iter()
                .any(|p| matches!(p, Param::Scalar(s) if s == &name))
            {
                return Ok(DlcOperand::Scalar(name));
            }
            c.err(format!("`{name}` is not a unit, stream, or scalar"))
        }
        other => c.err(format!("expected operand, found {other}")),
    }
}

fn parse_access_item(c: &mut Cursor, px: &mut Pcx) -> Result<(), ParseError> {
    match c.peek().clone() {
        Tok::Ident(id) if id == "tu" => {
            c.bump();
            let name = c.expect_ident()?;
            c.expect_punct("=")?;
            c.expect_kw("loop_tr")?;
            let width = if c.eat_punct("<") {
                let w = c.expect_int()? as u32;
                c.expect_punct(">")?;
                w
            } else {
                1
            };
            c.expect_punct("(")?;
            let lo = parse_operand(c, px)?;
            c.expect_punct(",")?;
            let ub = parse_operand(c, px)?;
            c.expect_punct(",")?;
            let stride = c.expect_int()?;
            c.expect_punct(")")?;
            c.expect_punct(";")?;
            let id = px.units.len();
            px.unit_ids.insert(name.clone(), id);
            px.units.push(TraversalUnit {
                id,
                name,
                lo,
                ub,
                stride,
                width,
            });
            Ok(())
        }
        Tok::Ident(id) if id == "str" => {
            c.bump();
            let name = c.expect_ident()?;
            c.expect_punct("=")?;
            let uname = c.expect_ident()?;
            let level = *px.unit_ids.get(&uname).ok_or_else(|| ParseError {
                loc: c.loc(),
                message: format!("unknown traversal unit `{uname}`"),
            })?;
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
                    c.expect_punct(",")?;
                    let mut index = vec![parse_operand(c, px)?];
                    while c.eat_punct("+") {
                        index.push(parse_operand(c, px)?);
                    }
                    c.expect_punct(")")?;
                    let hint = parse_hint(c)?;
                    c.expect_punct(";")?;
                    DlcStreamKind::Mem { mem, index, hint }
                }
                "alu_str" => {
                    c.expect_punct("(")?;
                    let op = parse_alu_op(c)?;
                    c.expect_punct(",")?;
                    let lhs = parse_operand(c, px)?;
                    c.expect_punct(",")?;
                    let rhs = parse_operand(c, px)?;
                    c.expect_punct(")")?;
                    c.expect_punct(";")?;
                    DlcStreamKind::Alu { op, lhs, rhs }
                }
                other => return c.err(format!("unknown stream expression `{other}`")),
            };
            px.stream_widths.insert(name.clone(), width);
            px.streams.push(DlcStream {
                name,
                level,
                width,
                kind,
            });
            Ok(())
        }
        Tok::Ident(id) if id == "push_op" => {
            c.bump();
            let width = if c.eat_punct("<") {
                let w = c.expect_int()? as u32;
                c.expect_punct(">")?;
                Some(w)
            } else {
                None
            };
            c.expect_punct("(")?;
            let src_name = c.expect_ident()?;
            let source = if let Some(id) = px.unit_ids.get(&src_name) {
                c.expect_punct(".")?;
                c.expect_kw("ite")?;
                PushSource::IteBase(*id)
            } else {
                PushSource::Stream(src_name.clone())
            };
            c.expect_punct(",")?;
            let uname = c.expect_ident()?;
            let tu = *px.unit_ids.get(&uname).ok_or_else(|| ParseError {
                loc: c.loc(),
                message: format!("unknown traversal unit `{uname}`"),
            })?;
            c.expect_punct(",")?;
            let event = parse_event(c)?;
            c.expect_punct(")")?;
            c.expect_punct(";")?;
            let width = width.unwrap_or_else(|| match &source {
                PushSource::Stream(s) => px.stream_widths.get(s).copied().unwrap_or(1),
                PushSource::IteBase(_) => 1,
            });
            px.marshals.push(MarshalOp::Push {
                source,
                tu,
                event,
                width,
            });
            Ok(())
        }
        Tok::Ident(id) if id == "callback" => {
            c.bump();
            c.expect_punct("(")?;
            let uname = c.expect_ident()?;
            let tu = *px.unit_ids.get(&uname).ok_or_else(|| ParseError {
                loc: c.loc(),
                message: format!("unknown traversal unit `{uname}`"),
            })?;
            c.expect_punct(",")?;
            let event = parse_event(c)?;
            c.expect_punct(")")?;
            let at = if c.eat_punct("@") {
                parse_event(c)?
            } else {
                event
            };
            c.expect_punct(";")?;
            px.marshals.push(MarshalOp::Trigger { tu, event, at });
            Ok(())
        }
        Tok::Ident(uname) => {
            // `<unit>.store_str[<w>](mem, idx..., value);`
            c.bump();
            let tu = *px.unit_ids.get(&uname).ok_or_else(|| ParseError {
                loc: c.loc(),
                message: format!("unknown access construct `{uname}`"),
            })?;
            c.expect_punct(".")?;
            c.expect_kw("store_str")?;
            let width = if c.eat_punct("<") {
                let w = c.expect_int()? as u32;
                c.expect_punct(">")?;
                w
            } else {
                1
            };
            c.expect_punct("(")?;
            let mem = c.expect_ident()?;
            c.expect_punct(",")?;
            let mut index = vec![parse_operand(c, px)?];
            while c.eat_punct("+") {
                index.push(parse_operand(c, px)?);
            }
            c.expect_punct(",")?;
            let value = c.expect_ident()?;
            c.expect_punct(")")?;
            c.expect_punct(";")?;
            px.marshals.push(MarshalOp::Store {
                mem,
                index,
                value,
                tu,
                width,
            });
            Ok(())
        }
        other => c.err(format!("expected access item, found {other}")),
    }
}

fn parse_alu_op(c: &mut Cursor) -> Result<crate::types::BinOp, ParseError> {
    for sym in ["+", "-", "*", "/", "%"] {
        if c.eat_punct(sym) {
            return Ok(crate::types::BinOp::from_symbol(sym).unwrap());
        }
    }
    c.err("expected ALU operator")
}

fn parse_hint(c: &mut Cursor) -> Result<Option<crate::slc::LoadHint>, ParseError> {
    if !c.eat_punct("@") {
        return Ok(None);
    }
    c.expect_kw("hint")?;
    c.expect_punct("(")?;
    let level = match c.expect_ident()?.as_str() {
        "L1" => crate::slc::CacheLevel::L1,
        "L2" => crate::slc::CacheLevel::L2,
        "LLC" => crate::slc::CacheLevel::Llc,
        other => return c.err(format!("unknown cache level `{other}`")),
    };
    c.expect_punct(",")?;
    let temporal = match c.expect_ident()?.as_str() {
        "temporal" => true,
        "nontemporal" => false,
        other => return c.err(format!("expected temporal/nontemporal, found `{other}`")),
    };
    c.expect_punct(")")?;
    Ok(Some(crate::slc::LoadHint {
        cache_level: level,
        temporal,
    }))
}
