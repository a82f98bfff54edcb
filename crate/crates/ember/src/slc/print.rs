//! Canonical textual form of SLC/SLCV functions; `parse_slc` reads it back.

use super::*;
use crate::cpu;
use crate::scf::Param;
use crate::types::{ElemType, ValType};
use std::fmt::Write as _;

fn elem_kw(t: ElemType) -> &'static str {
    match t {
        ElemType::Index => "index",
        ElemType::I32 => "i32",
        ElemType::F32 => "f32",
    }
}

fn val_type_str(t: ValType) -> String {
    match t {
        ValType::Scalar(e) => elem_kw(e).to_string(),
        ValType::Vec(e, w) => format!("vec<{w} x {}>", elem_kw(e)),
        ValType::Mask(w) => format!("vmask<{w}>"),
        ValType::Chunks(e, w) => format!("chunks<{w} x {}>", elem_kw(e)),
    }
}

fn operand_str(o: &Operand) -> String {
    match o {
        Operand::Stream(s) | Operand::Var(s) => s.clone(),
        Operand::Lit(v) => v.to_string(),
    }
}

fn index_operand_str(o: &IndexOperand) -> String {
    if o.offset == 0 {
        operand_str(&o.base)
    } else {
        format!("{} + {}", operand_str(&o.base), o.offset)
    }
}

fn range_str(r: &RangeRef) -> String {
    match r {
        RangeRef::Stream(s) | RangeRef::Var(s) => s.clone(),
        RangeRef::Lit(v) => v.to_string(),
    }
}

fn hint_str(h: &LoadHint) -> String {
    format!(
        " @ hint({}, {})",
        h.cache_level,
        if h.temporal { "temporal" } else { "nontemporal" }
    )
}

pub fn print_slc(f: &SlcFunction) -> String {
    let mut out = String::new();
    write!(out, "void {}(", f.name).unwrap();
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match p {
            Param::Mem(m) => {
                write!(out, "{}: mref<", m.name).unwrap();
                for d in &m.shape {
                    write!(out, "{d} x ").unwrap();
                }
                write!(out, "{}>", elem_kw(m.elem)).unwrap();
            }
            Param::Scalar(s) => write!(out, "{s}: index").unwrap(),
        }
    }
    out.push_str(") {\n");
    print_items(&mut out, &f.items, 1);
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_items(out: &mut String, items: &[SlcItem], level: usize) {
    for it in items {
        match it {
            SlcItem::Decl(d) => {
                indent(out, level);
                print_decl(out, d);
            }
            SlcItem::Push { buf, src } => {
                indent(out, level);
                writeln!(out, "slc.push({buf}, {src});").unwrap();
            }
            SlcItem::StoreStream {
                mem,
                idx,
                value,
                width,
                mask,
            } => {
                indent(out, level);
                let ix: Vec<String> = idx.iter().map(index_operand_str).collect();
                if *width > 1 {
                    let m = mask.as_deref().unwrap_or("_");
                    writeln!(
                        out,
                        "slcv.store_str<{width}>({mem}[{}], {value}, {m});",
                        ix.join(", ")
                    )
                    .unwrap();
                } else {
                    writeln!(out, "slc.store_str({mem}[{}], {value});", ix.join(", ")).unwrap();
                }
            }
            SlcItem::Loop(l) => print_loop(out, l, level),
            SlcItem::Call(c) => print_callback(out, c, level),
        }
    }
}

fn print_decl(out: &mut String, d: &StreamDecl) {
    match &d.kind {
        StreamKind::Load {
            mem,
            idx,
            width,
            mask,
            hint,
        } => {
            let ix: Vec<String> = idx.iter().map(index_operand_str).collect();
            let h = hint.as_ref().map(hint_str).unwrap_or_default();
            if *width > 1 {
                let m = mask.as_deref().unwrap_or("_");
                writeln!(
                    out,
                    "str {} = slcv.mem_str<{width}>({mem}[{}], {m}){h};",
                    d.name,
                    ix.join(", ")
                )
                .unwrap();
            } else {
                writeln!(out, "str {} = slc.mem_str({mem}[{}]){h};", d.name, ix.join(", "))
                    .unwrap();
            }
        }
        StreamKind::Alu { op, lhs, rhs, width } => {
            if *width > 1 {
                writeln!(
                    out,
                    "str {} = slcv.alu_str<{width}>({op}, {}, {});",
                    d.name,
                    operand_str(lhs),
                    operand_str(rhs)
                )
                .unwrap();
            } else {
                writeln!(
                    out,
                    "str {} = slc.alu_str({op}, {}, {});",
                    d.name,
                    operand_str(lhs),
                    operand_str(rhs)
                )
                .unwrap();
            }
        }
        StreamKind::Buf { elem, vlen } => {
            writeln!(
                out,
                "str<vec<{vlen} x {}>> {} = slcv.buf_str();",
                elem_kw(*elem),
                d.name
            )
            .unwrap();
        }
    }
}

fn print_loop(out: &mut String, l: &SlcLoop, level: usize) {
    indent(out, level);
    match l.vlen {
        Some(v) => {
            write!(
                out,
                "slcv.for<{v}>((str {}, str {}) from {} to {} step {})",
                l.stream,
                l.mask.as_deref().unwrap_or("_"),
                range_str(&l.lo),
                range_str(&l.hi),
                l.step
            )
            .unwrap();
        }
        None => {
            write!(
                out,
                "slc.for(str {} from {} to {} step {})",
                l.stream,
                range_str(&l.lo),
                range_str(&l.hi),
                l.step
            )
            .unwrap();
        }
    }
    if !l.carried.is_empty() {
        let cvs: Vec<String> = l
            .carried
            .iter()
            .map(|c| format!("index {} = {}", c.name, c.init))
            .collect();
        write!(out, " ({})", cvs.join(", ")).unwrap();
    }
    out.push_str(" {\n");
    print_items(out, &l.items, level + 1);
    indent(out, level);
    out.push_str("}\n");
}

fn print_callback(out: &mut String, c: &Callback, level: usize) {
    indent(out, level);
    let vectorized = c
        .tovals
        .iter()
        .any(|t| matches!(t.kind, ToValKind::Vector | ToValKind::MaskRead | ToValKind::Lane0));
    if vectorized {
        out.push_str("slcv.callback {\n");
    } else {
        out.push_str("slc.callback {\n");
    }
    for tv in &c.tovals {
        indent(out, level + 1);
        let rhs = match tv.kind {
            ToValKind::Scalar | ToValKind::MaskRead | ToValKind::Buffer => {
                format!("slc.to_val({})", tv.stream)
            }
            ToValKind::Lane0 => format!("slcv.to_val({})[0]", tv.stream),
            ToValKind::Vector => match tv.ty {
                ValType::Vec(_, w) => format!("slcv.to_val<{w}>({})", tv.stream),
                _ => format!("slcv.to_val({})", tv.stream),
            },
        };
        match tv.padded {
            Some(w) => writeln!(out, "{} {} = {rhs} @ pad({w});", val_type_str(tv.ty), tv.var)
                .unwrap(),
            None => writeln!(out, "{} {} = {rhs};", val_type_str(tv.ty), tv.var).unwrap(),
        }
    }
    let mut body = String::new();
    cpu::print_stmts(&mut body, &c.stmts, level + 1);
    // cpu::print_stmts uses idx for the index keyword; the SLC surface uses
    // the same tokens, so the text can be appended directly.
    out.push_str(&body);
    indent(out, level);
    out.push_str("}\n");
}
