//! Grammar-shape, scoping, width, and value-conversion checks for SLC/SLCV
//! functions.

use super::*;
use crate::cpu::{CpuStmt, MemSig, TypeCk};
use crate::diag::{Diag, Diags};
use crate::types::ElemType;
use std::collections::{BTreeSet, HashMap};

impl MemSig for SlcFunction {
    fn mem_info(&self, name: &str) -> Option<(ElemType, usize)> {
        self.memref(name).map(|m| (m.elem, m.rank()))
    }

    fn is_scalar_param(&self, name: &str) -> bool {
        SlcFunction::is_scalar_param(self, name)
    }
}

/// Stream typing information collected during verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum StreamTy {
    Scalar(ElemType),
    Vector(ElemType, u32),
    Mask(u32),
    Buffer(ElemType, u32),
}

pub fn verify_slc(f: &SlcFunction) -> Result<(), Diags> {
    let mut diags = Diags::default();
    let mut cx = Vcx {
        f,
        diags: &mut diags,
        streams: HashMap::new(),
        carried: HashMap::new(),
        names: BTreeSet::new(),
    };
    for p in &f.params {
        cx.names.insert(p.name().to_string());
    }
    cx.items(&f.items, "fn", None, &[]);
    diags.into_result()
}

struct Vcx<'a> {
    f: &'a SlcFunction,
    diags: &'a mut Diags,
    /// All visible streams by name (function-wide unique names).
    streams: HashMap<String, StreamTy>,
    /// Visible loop-carried variables.
    carried: HashMap<String, u64>,
    /// Every declared name, for uniqueness checks.
    names: BTreeSet<String>,
}

impl<'a> Vcx<'a> {
    fn err(&mut self, path: &str, msg: String) {
        self.diags.push(Diag::new(path.to_string(), msg));
    }

    fn declare(&mut self, path: &str, name: &str, ty: StreamTy) {
        if !self.names.insert(name.to_string()) {
            self.err(path, format!("duplicate name `{name}`"));
        }
        self.streams.insert(name.to_string(), ty);
    }

    /// `ancestors` holds the induction-stream names of enclosing loops;
    /// `cur` is the current loop (None at function top level).
    fn items(&mut self, items: &[SlcItem], path: &str, cur: Option<&SlcLoop>, ancestors: &[&SlcLoop]) {
        // Shape: decls/pushes/stores first, then CALL? LOOP? CALL?.
        let mut seen_call_or_loop = false;
        let mut loops = 0usize;
        let mut calls_before = 0usize;
        let mut calls_after = 0usize;
        for it in items {
            match it {
                SlcItem::Decl(_) | SlcItem::Push { .. } | SlcItem::StoreStream { .. } => {
                    if seen_call_or_loop {
                        self.err(path, "stream declarations must precede callbacks and nested loops".into());
                    }
                }
                SlcItem::Loop(_) => {
                    loops += 1;
                    if loops > 1 {
                        self.err(path, "at most one nested loop per body".into());
                    }
                    seen_call_or_loop = true;
                }
                SlcItem::Call(_) => {
                    if loops == 0 {
                        calls_before += 1;
                    } else {
                        calls_after += 1;
                    }
                    seen_call_or_loop = true;
                }
            }
        }
        if calls_before > 1 || calls_after > 1 {
            self.err(path, "at most one callback before and one after a nested loop".into());
        }
        if loops == 0 && calls_before > 1 {
            self.err(path, "a leaf body holds at most one callback".into());
        }

        let mut nested_seen = false;
        for it in items {
            match it {
                SlcItem::Decl(d) => self.decl(d, path, cur),
                SlcItem::Push { buf, src } => self.push(buf, src, path, cur, ancestors),
                SlcItem::StoreStream {
                    mem,
                    idx,
                    value,
                    width,
                    mask,
                } => self.store_stream(mem, idx, value, *width, mask, path, cur),
                SlcItem::Loop(l) => {
                    nested_seen = true;
                    self.nested(l, path, cur, ancestors);
                }
                SlcItem::Call(c) => {
                    let is_end = nested_seen;
                    self.callback(c, path, cur, ancestors, is_end);
                }
            }
        }
    }

    fn nested(&mut self, l: &SlcLoop, path: &str, parent: Option<&SlcLoop>, ancestors: &[&SlcLoop]) {
        let p = format!("{path}/loop {}", l.stream);
        if l.step == 0 {
            self.err(&p, "loop stride must be positive".into());
        }
        if let Some(v) = l.vlen {
            if v == 0 || !v.is_power_of_two() {
                self.err(&p, format!("vector length {v} must be a power of two"));
            }
            if l.mask.is_none() {
                self.err(&p, "vectorized loop needs a mask stream".into());
            }
            if l.inner_loop().is_some() {
                self.err(&p, "vectorized loops must be innermost".into());
            }
        } else if l.mask.is_some() {
            self.err(&p, "mask stream on a scalar loop".into());
        }
        // Range endpoints: streams must come from the parent level.
        for (what, r) in [("lower", &l.lo), ("upper", &l.hi)] {
            match r {
                RangeRef::Stream(s) => match self.streams.get(s) {
                    Some(StreamTy::Scalar(t)) if t.is_integer() => {}
                    Some(_) => self.err(&p, format!("{what} bound `{s}` must be a scalar integer stream")),
                    None => self.err(&p, format!("{what} bound references unknown stream `{s}`")),
                },
                RangeRef::Var(v) => {
                    if !self.f.is_scalar_param(v) {
                        self.err(&p, format!("{what} bound `{v}` is not a scalar parameter"));
                    }
                }
                RangeRef::Lit(_) => {}
            }
        }
        // Induction and mask streams become visible inside.
        let ind_ty = match l.vlen {
            Some(v) => StreamTy::Vector(ElemType::Index, v),
            None => StreamTy::Scalar(ElemType::Index),
        };
        self.declare(&p, &l.stream, ind_ty);
        if let (Some(m), Some(v)) = (&l.mask, l.vlen) {
            self.declare(&p, m, StreamTy::Mask(v));
        }
        for cv in &l.carried {
            if !self.names.insert(cv.name.clone()) {
                self.err(&p, format!("duplicate name `{}`", cv.name));
            }
            self.carried.insert(cv.name.clone(), cv.init);
        }
        let mut anc: Vec<&SlcLoop> = ancestors.to_vec();
        if let Some(parent) = parent {
            anc.push(parent);
        }
        self.items(&l.items, &p, Some(l), &anc);
    }

    fn operand(&mut self, o: &Operand, path: &str, want_int: bool) -> Option<StreamTy> {
        match o {
            Operand::Stream(s) => match self.streams.get(s).copied() {
                Some(t) => {
                    if want_int {
                        let ok = matches!(t, StreamTy::Scalar(e) | StreamTy::Vector(e, _) if e.is_integer());
                        if !ok {
                            self.err(path, format!("stream `{s}` is not integer-typed"));
                        }
                    }
                    Some(t)
                }
                None => {
                    self.err(path, format!("unknown stream `{s}`"));
                    None
                }
            },
            Operand::Var(v) => {
                if !self.f.is_scalar_param(v) {
                    self.err(path, format!("`{v}` is not a scalar parameter"));
                }
                Some(StreamTy::Scalar(ElemType::Index))
            }
            Operand::Lit(_) => Some(StreamTy::Scalar(ElemType::Index)),
        }
    }

    fn decl(&mut self, d: &StreamDecl, path: &str, cur: Option<&SlcLoop>) {
        let p = format!("{path}/str {}", d.name);
        let loop_vlen = cur.and_then(|l| l.vlen);
        match &d.kind {
            StreamKind::Load {
                mem,
                idx,
                width,
                mask,
                ..
            } => {
                let elem = match self.f.memref(mem) {
                    Some(m) => {
                        if idx.len() != m.rank() {
                            self.err(
                                &p,
                                format!("memref `{mem}` has rank {}, load uses {} indices", m.rank(), idx.len()),
                            );
                        }
                        m.elem
                    }
                    None => {
                        self.err(&p, format!("unknown memref `{mem}`"));
                        ElemType::F32
                    }
                };
                for ix in idx {
                    self.operand(&ix.base, &p, true);
                }
                if *width > 1 {
                    if loop_vlen != Some(*width) {
                        self.err(&p, format!("vector load width {width} outside a matching vectorized loop"));
                    }
                    match (mask, cur.and_then(|l| l.mask.clone())) {
                        (Some(m), Some(lm)) if *m == lm => {}
                        _ => self.err(&p, "vector load must carry the loop mask".into()),
                    }
                    self.declare(&p, &d.name, StreamTy::Vector(elem, *width));
                } else {
                    if mask.is_some() {
                        self.err(&p, "scalar load cannot take a mask".into());
                    }
                    self.declare(&p, &d.name, StreamTy::Scalar(elem));
                }
            }
            StreamKind::Alu { lhs, rhs, width, .. } => {
                let lt = self.operand(lhs, &p, true);
                let rt = self.operand(rhs, &p, true);
                let lane_w = |t: Option<StreamTy>| match t {
                    Some(StreamTy::Vector(_, w)) => w,
                    _ => 1,
                };
                let w = lane_w(lt).max(lane_w(rt));
                if *width != w {
                    self.err(&p, format!("alu stream width {width} does not match operand width {w}"));
                }
                let ty = if *width > 1 {
                    StreamTy::Vector(ElemType::Index, *width)
                } else {
                    StreamTy::Scalar(ElemType::Index)
                };
                self.declare(&p, &d.name, ty);
            }
            StreamKind::Buf { elem, vlen } => {
                match cur {
                    Some(l) if l.inner_loop().is_some() => {}
                    _ => self.err(&p, "buffer streams are declared between a loop and its inner loop".into()),
                }
                self.declare(&p, &d.name, StreamTy::Buffer(*elem, *vlen));
            }
        }
    }

    fn push(&mut self, buf: &str, src: &str, path: &str, cur: Option<&SlcLoop>, _anc: &[&SlcLoop]) {
        let p = format!("{path}/push {buf}");
        if cur.is_none() {
            self.err(&p, "push outside a loop".into());
        }
        let bt = self.streams.get(buf).copied();
        let st = self.streams.get(src).copied();
        match bt {
            Some(StreamTy::Buffer(elem, vlen)) => match st {
                Some(StreamTy::Vector(e, w)) if e == elem && w == vlen => {}
                Some(_) => self.err(&p, format!("pushed stream `{src}` does not match buffer element type")),
                None => self.err(&p, format!("unknown stream `{src}`")),
            },
            Some(_) => self.err(&p, format!("`{buf}` is not a buffer stream")),
            None => self.err(&p, format!("no buffer stream `{buf}` in scope")),
        }
        // The buffer must belong to an ancestor loop, not this one.
        if let Some(l) = cur {
            if l.decls().any(|d| d.name == buf) {
                self.err(&p, "push target must be declared in an ancestor loop".into());
            }
        }
    }

    fn store_stream(
        &mut self,
        mem: &str,
        idx: &[IndexOperand],
        value: &str,
        width: u32,
        mask: &Option<String>,
        path: &str,
        cur: Option<&SlcLoop>,
    ) {
        let p = format!("{path}/store_str {mem}");
        let elem = match self.f.memref(mem) {
            Some(m) => {
                if idx.len() != m.rank() {
                    self.err(&p, format!("memref `{mem}` has rank {}, store uses {} indices", m.rank(), idx.len()));
                }
                m.elem
            }
            None => {
                self.err(&p, format!("unknown memref `{mem}`"));
                ElemType::F32
            }
        };
        for ix in idx {
            self.operand(&ix.base, &p, true);
        }
        match self.streams.get(value).copied() {
            Some(StreamTy::Scalar(e)) if width == 1 && e == elem => {}
            Some(StreamTy::Vector(e, w)) if w == width && e == elem => {}
            Some(_) => self.err(&p, format!("value stream `{value}` does not match store width/type")),
            None => self.err(&p, format!("unknown stream `{value}`")),
        }
        if width > 1 {
            match (mask, cur.and_then(|l| l.mask.clone())) {
                (Some(m), Some(lm)) if *m == lm => {}
                _ => self.err(&p, "vector store stream must carry the loop mask".into()),
            }
        }
    }

    fn callback(&mut self, c: &Callback, path: &str, _cur: Option<&SlcLoop>, _anc: &[&SlcLoop], is_end: bool) {
        let p = format!("{path}/callback");
        let mut ck = TypeCk::new(self.f);
        for cv_name in self.carried.keys() {
            ck.vars.insert(cv_name.clone(), crate::types::ValType::Scalar(ElemType::Index));
            if is_end {
                ck.bumpable.insert(cv_name.clone());
            }
        }
        let mut seen_vars: BTreeSet<String> = BTreeSet::new();
        for tv in &c.tovals {
            if !seen_vars.insert(tv.var.clone()) {
                self.err(&p, format!("duplicate conversion variable `{}`", tv.var));
            }
            let st = self.streams.get(&tv.stream).copied();
            let want = match (st, tv.kind) {
                (Some(StreamTy::Scalar(e)), ToValKind::Scalar) => crate::types::ValType::Scalar(e),
                (Some(StreamTy::Vector(e, _)), ToValKind::Lane0) => crate::types::ValType::Scalar(e),
                (Some(StreamTy::Vector(e, w)), ToValKind::Vector) => crate::types::ValType::Vec(e, w),
                (Some(StreamTy::Mask(w)), ToValKind::MaskRead) => crate::types::ValType::Mask(w),
                (Some(StreamTy::Buffer(e, w)), ToValKind::Buffer) => crate::types::ValType::Chunks(e, w),
                (None, _) => {
                    self.err(&p, format!("to_val reads unknown stream `{}`", tv.stream));
                    tv.ty
                }
                (Some(_), _) => {
                    self.err(
                        &p,
                        format!("to_val kind does not match stream `{}`", tv.stream),
                    );
                    tv.ty
                }
            };
            if want != tv.ty {
                self.err(&p, format!("`{}` declared {} but conversion yields {want}", tv.var, tv.ty));
            }
            ck.vars.insert(tv.var.clone(), tv.ty);
        }
        if c.tovals.is_empty() && c.stmts.is_empty() {
            self.err(&p, "empty callback".into());
        }
        ck.check_stmts(&c.stmts);
        let errs = std::mem::take(&mut ck.errors);
        for e in errs {
            self.err(&p, e);
        }
        // Every name a statement reads must have flowed through a conversion,
        // a carried variable, a scalar, or a local: raw stream names are not
        // visible. TypeCk already reports unknown variables, so the remaining
        // check is that no statement names a stream directly.
        let stream_names: Vec<String> = self.streams.keys().cloned().collect();
        check_no_stream_refs(&c.stmts, &stream_names, &mut |name| {
            self.diags.push(Diag::new(
                p.clone(),
                format!("callback statement reads stream `{name}` without a to_val conversion"),
            ));
        });
    }
}

fn check_no_stream_refs(stmts: &[CpuStmt], streams: &[String], report: &mut dyn FnMut(&str)) {
    fn expr(e: &crate::cpu::CpuExpr, streams: &[String], report: &mut dyn FnMut(&str)) {
        match e {
            crate::cpu::CpuExpr::Var(v) => {
                if streams.iter().any(|s| s == v) {
                    report(v);
                }
            }
            crate::cpu::CpuExpr::Bin { lhs, rhs, .. } => {
                expr(lhs, streams, report);
                expr(rhs, streams, report);
            }
            crate::cpu::CpuExpr::Load { idx, .. } => {
                for i in idx {
                    expr(i, streams, report);
                }
            }
            crate::cpu::CpuExpr::VLoad { idx, .. } => {
                for i in idx {
                    expr(i, streams, report);
                }
            }
            crate::cpu::CpuExpr::Chunk { pos, .. } => expr(pos, streams, report),
            crate::cpu::CpuExpr::ReduceAdd { init, v, .. } => {
                expr(init, streams, report);
                expr(v, streams, report);
            }
            crate::cpu::CpuExpr::MaskRemainder { offset, bound, .. } => {
                expr(offset, streams, report);
                expr(bound, streams, report);
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            CpuStmt::Assign { value, .. } => expr(value, streams, report),
            CpuStmt::Store { idx, value, .. } => {
                for i in idx {
                    expr(i, streams, report);
                }
                expr(value, streams, report);
            }
            CpuStmt::VStore { idx, value, .. } => {
                for i in idx {
                    expr(i, streams, report);
                }
                expr(value, streams, report);
            }
            CpuStmt::For { lo, hi, body, .. } => {
                expr(lo, streams, report);
                expr(hi, streams, report);
                check_no_stream_refs(body, streams, report);
            }
            _ => {}
        }
    }
}
