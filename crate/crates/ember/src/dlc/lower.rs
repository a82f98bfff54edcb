//! Lowering from the structured form to the decoupled form: loops become
//! traversal units, stream declarations become dataflow streams (with
//! explicit flat addressing), and each callback becomes a control-queue
//! trigger, matching data-queue pushes, and one execute arm.

use super::*;
use crate::cpu::{CpuExpr, CpuStmt};
use crate::diag::{Diag, Diags};
use crate::mem::Dim;
use crate::slc::{
    Callback, IndexOperand, Operand, RangeRef, SlcFunction, SlcItem, SlcLoop, StreamKind,
    ToValKind,
};
use crate::types::{BinOp, ElemType, ValType};
use std::collections::{HashMap, HashSet};

pub fn lower_slc_to_dlc(f: &SlcFunction) -> Result<DlcProgram, Diags> {
    crate::slc::verify_slc(f)?;
    let mut lw = Lower {
        f,
        units: Vec::new(),
        streams: Vec::new(),
        marshals: Vec::new(),
        arms: Vec::new(),
        locals: Vec::new(),
        map: HashMap::new(),
        widths: HashMap::new(),
        used: f.params.iter().map(|p| p.name().to_string()).collect(),
        diags: Diags::default(),
    };
    match f.root_loop() {
        Some(root) => lw.lower_loop(root),
        None => {
            // Pure-compute function: a synthetic single-iteration unit hosts
            // the callback trigger.
            lw.units.push(TraversalUnit {
                id: 0,
                name: "fn_tr".into(),
                lo: DlcOperand::Lit(0),
                ub: DlcOperand::Lit(1),
                stride: 1,
                width: 1,
            });
            for item in &f.items {
                if let SlcItem::Call(cb) = item {
                    lw.lower_callback(
                        cb,
                        Token {
                            tu: 0,
                            event: Event::Ite,
                        },
                        None,
                    );
                }
            }
        }
    }
    if !lw.diags.is_empty() {
        return Err(lw.diags);
    }
    Ok(DlcProgram {
        name: f.name.clone(),
        params: f.params.clone(),
        access: AccessProgram {
            units: lw.units,
            streams: lw.streams,
            marshals: lw.marshals,
        },
        execute: ExecuteProgram {
            locals: lw.locals,
            arms: lw.arms,
        },
    })
}

struct Lower<'a> {
    f: &'a SlcFunction,
    units: Vec<TraversalUnit>,
    streams: Vec<DlcStream>,
    marshals: Vec<MarshalOp>,
    arms: Vec<Arm>,
    locals: Vec<(String, u64)>,
    /// SLC stream name -> DLC operand (streams stay streams, inductions
    /// become unit references).
    map: HashMap<String, DlcOperand>,
    /// SLC stream name -> lane width.
    widths: HashMap<String, u32>,
    used: HashSet<String>,
    diags: Diags,
}

impl<'a> Lower<'a> {
    fn err(&mut self, msg: String) {
        self.diags.push(Diag::new("lower", msg));
    }

    fn fresh(&mut self, hint: &str) -> String {
        let mut name = hint.to_string();
        let mut k = 0;
        while !self.used.insert(name.clone()) {
            name = format!("{hint}_{k}");
            k += 1;
        }
        name
    }

    fn unit_name(&mut self, ind_stream: &str) -> String {
        let base = ind_stream.strip_prefix("s_").unwrap_or(ind_stream);
        self.fresh(&format!("{base}_tr"))
    }

    fn range_op(&mut self, r: &RangeRef) -> DlcOperand {
        match r {
            RangeRef::Lit(v) => DlcOperand::Lit(*v),
            RangeRef::Var(v) => DlcOperand::Scalar(v.clone()),
            RangeRef::Stream(s) => match self.map.get(s) {
                Some(op) => op.clone(),
                None => {
                    self.err(format!("range references unlowered stream `{s}`"));
                    DlcOperand::Lit(0)
                }
            },
        }
    }

    fn operand(&mut self, o: &Operand) -> DlcOperand {
        match o {
            Operand::Lit(v) => DlcOperand::Lit(*v),
            Operand::Var(v) => DlcOperand::Scalar(v.clone()),
            Operand::Stream(s) => match self.map.get(s) {
                Some(op) => op.clone(),
                None => {
                    self.err(format!("operand references unlowered stream `{s}`"));
                    DlcOperand::Lit(0)
                }
            },
        }
    }

    fn lower_loop(&mut self, l: &SlcLoop) {
        let level = self.units.len();
        let name = self.unit_name(&l.stream);
        let lo = self.range_op(&l.lo);
        let ub = self.range_op(&l.hi);
        self.units.push(TraversalUnit {
            id: level,
            name,
            lo,
            ub,
            stride: l.step,
            width: l.vlen.unwrap_or(1),
        });
        self.map.insert(l.stream.clone(), DlcOperand::Ite(level));
        self.widths
            .insert(l.stream.clone(), l.vlen.unwrap_or(1));
        if !l.carried.is_empty() && level != 0 {
            // Execute-side locals initialize once per run; a carried
            // variable on a nested loop would need per-entry resets the
            // token protocol does not carry.
            self.err(format!(
                "loop `{}`: carried variables are only supported on the outermost loop",
                l.stream
            ));
        }
        for cv in &l.carried {
            self.locals.push((cv.name.clone(), cv.init));
        }
        // First pass: declarations, pushes, stores, and the nested loop.
        let mut saw_loop = false;
        for item in &l.items {
            match item {
                SlcItem::Decl(d) => self.lower_decl(d, level, l),
                SlcItem::Push { src, .. } => {
                    let width = self.widths.get(src).copied().unwrap_or(1);
                    let source = match self.map.get(src) {
                        Some(DlcOperand::Stream(s)) => PushSource::Stream(s.clone()),
                        Some(DlcOperand::Ite(t)) => PushSource::IteBase(*t),
                        _ => {
                            self.err(format!("push of unlowered stream `{src}`"));
                            continue;
                        }
                    };
                    self.marshals.push(MarshalOp::Push {
                        source,
                        tu: level,
                        event: Event::Ite,
                        width,
                    });
                }
                SlcItem::StoreStream {
                    mem,
                    idx,
                    value,
                    width,
                    ..
                } => {
                    let index = self.flat_index(mem, idx, level, &format!("st_{mem}"));
                    let value = match self.map.get(value) {
                        Some(DlcOperand::Stream(s)) => s.clone(),
                        _ => {
                            self.err(format!("store stream of unlowered `{value}`"));
                            continue;
                        }
                    };
                    self.marshals.push(MarshalOp::Store {
                        mem: mem.clone(),
                        index,
                        value,
                        tu: level,
                        width: *width,
                    });
                }
                SlcItem::Loop(inner) => {
                    saw_loop = true;
                    self.lower_loop(inner);
                }
                SlcItem::Call(_) => {}
            }
        }
        // Second pass: callbacks, with tokens fixed by position.
        let child = saw_loop.then_some(level + 1);
        let mut before_loop = true;
        for item in &l.items {
            match item {
                SlcItem::Loop(_) => before_loop = false,
                SlcItem::Call(cb) => {
                    let token = match (child, before_loop) {
                        (None, _) => Token {
                            tu: level,
                            event: Event::Ite,
                        },
                        (Some(c), true) => Token {
                            tu: c,
                            event: Event::Beg,
                        },
                        (Some(c), false) => Token {
                            tu: c,
                            event: Event::End,
                        },
                    };
                    self.lower_callback(cb, token, Some(l));
                }
                _ => {}
            }
        }
    }

    fn lower_decl(&mut self, d: &crate::slc::StreamDecl, level: usize, _l: &SlcLoop) {
        match &d.kind {
            StreamKind::Buf { .. } => {
                // The data queue itself buffers pushed chunks; nothing to
                // declare on the access side.
            }
            StreamKind::Alu { op, lhs, rhs, width } => {
                let lhs = self.operand(lhs);
                let rhs = self.operand(rhs);
                self.streams.push(DlcStream {
                    name: d.name.clone(),
                    level,
                    width: *width,
                    kind: DlcStreamKind::Alu {
                        op: *op,
                        lhs,
                        rhs,
                    },
                });
                self.map
                    .insert(d.name.clone(), DlcOperand::Stream(d.name.clone()));
                self.widths.insert(d.name.clone(), *width);
            }
            StreamKind::Load {
                mem,
                idx,
                width,
                hint,
                ..
            } => {
                let index = self.flat_index(mem, idx, level, &d.name);
                self.streams.push(DlcStream {
                    name: d.name.clone(),
                    level,
                    width: *width,
                    kind: DlcStreamKind::Mem {
                        mem: mem.clone(),
                        index,
                        hint: *hint,
                    },
                });
                self.map
                    .insert(d.name.clone(), DlcOperand::Stream(d.name.clone()));
                self.widths.insert(d.name.clone(), *width);
            }
        }
    }

    /// Row-major flattening: `flat = sum(idx_d * stride_d)`. Strides over
    /// static dims are literals; dynamic dims resolve at run time. The final
    /// sum keeps up to two addends in the memory stream's addressing; a
    /// literal +k offset becomes an explicit ALU stream first.
    fn flat_index(
        &mut self,
        mem: &str,
        idx: &[IndexOperand],
        level: usize,
        hint: &str,
    ) -> Vec<DlcOperand> {
        let rank = idx.len();
        let shape: Vec<Dim> = self
            .f
            .memref(mem)
            .map(|m| m.shape.clone())
            .unwrap_or_else(|| vec![Dim::Dynamic; rank]);
        // Resolve each dimension index operand (apply literal offsets).
        let mut dims: Vec<DlcOperand> = Vec::with_capacity(rank);
        for (d, ix) in idx.iter().enumerate() {
            let base = self.operand(&ix.base);
            let op = if ix.offset == 0 {
                base
            } else {
                let name = self.fresh(&format!("{hint}_pos"));
                let width = self.operand_width(&base);
                self.streams.push(DlcStream {
                    name: name.clone(),
                    level,
                    width,
                    kind: DlcStreamKind::Alu {
                        op: BinOp::Add,
                        lhs: base,
                        rhs: DlcOperand::Lit(ix.offset),
                    },
                });
                self.widths.insert(name.clone(), width);
                DlcOperand::Stream(name)
            };
            let _ = d;
            dims.push(op);
        }
        // Scale every non-innermost dimension by its row-major stride.
        let mut terms: Vec<DlcOperand> = Vec::with_capacity(rank);
        for (d, op) in dims.into_iter().enumerate() {
            if d + 1 == rank {
                terms.push(op);
                continue;
            }
            // stride_d = product of sizes of dims d+1..rank.
            let mut factors: Vec<DlcOperand> = (d + 1..rank)
                .map(|k| match shape.get(k) {
                    Some(Dim::Static(n)) => DlcOperand::Lit(*n),
                    _ => DlcOperand::DimSize(mem.to_string(), k),
                })
                .collect();
            let mut stride = factors.remove(0);
            for fct in factors {
                let name = self.fresh(&format!("{hint}_stride"));
                self.streams.push(DlcStream {
                    name: name.clone(),
                    level,
                    width: 1,
                    kind: DlcStreamKind::Alu {
                        op: BinOp::Mul,
                        lhs: stride,
                        rhs: fct,
                    },
                });
                self.widths.insert(name.clone(), 1);
                stride = DlcOperand::Stream(name);
            }
            let name = self.fresh(&format!("{hint}_row"));
            let width = self.operand_width(&op);
            self.streams.push(DlcStream {
                name: name.clone(),
                level,
                width,
                kind: DlcStreamKind::Alu {
                    op: BinOp::Mul,
                    lhs: op,
                    rhs: stride,
                },
            });
            self.widths.insert(name.clone(), width);
            terms.push(DlcOperand::Stream(name));
        }
        // Fold down to at most two addends.
        while terms.len() > 2 {
            let b = terms.remove(1);
            let a = terms.remove(0);
            let name = self.fresh(&format!("{hint}_flat"));
            let width = self.operand_width(&a).max(self.operand_width(&b));
            self.streams.push(DlcStream {
                name: name.clone(),
                level,
                width,
                kind: DlcStreamKind::Alu {
                    op: BinOp::Add,
                    lhs: a,
                    rhs: b,
                },
            });
            self.widths.insert(name.clone(), width);
            terms.insert(0, DlcOperand::Stream(name));
        }
        terms
    }

    fn operand_width(&self, o: &DlcOperand) -> u32 {
        match o {
            DlcOperand::Stream(s) => self
                .streams
                .iter()
                .find(|d| &d.name == s)
                .map(|d| d.width)
                .unwrap_or(1),
            DlcOperand::Ite(t) => self.units.get(*t).map(|u| u.width).unwrap_or(1),
            _ => 1,
        }
    }

    fn lower_callback(&mut self, cb: &Callback, token: Token, owner: Option<&SlcLoop>) {
        // An end-callback that drains buffered chunks pops its scalar
        // operands first, so those are pushed at the child's begin event and
        // the token is announced there too (the arm then self-synchronizes
        // through its pops); without chunks everything rides the end event,
        // after all inner traffic.
        let consumes_buffers = cb.tovals.iter().any(|t| t.kind == ToValKind::Buffer);
        let at = if token.event == Event::End && consumes_buffers {
            Event::Beg
        } else {
            token.event
        };
        let scalar_event = match token.event {
            Event::Ite => Event::Ite,
            Event::Beg => Event::Beg,
            Event::End => {
                if consumes_buffers {
                    Event::Beg
                } else {
                    Event::End
                }
            }
        };
        let mut body: Vec<CpuStmt> = Vec::new();
        let mut buffer_vars: HashSet<String> = HashSet::new();
        let mut evar: Option<String> = None;
        for tv in &cb.tovals {
            match tv.kind {
                ToValKind::Scalar => {
                    let (elem, _) = match tv.ty {
                        ValType::Scalar(e) => (e, 1u32),
                        other => {
                            self.err(format!("scalar conversion with type {other}"));
                            (ElemType::Index, 1)
                        }
                    };
                    let source = match self.map.get(&tv.stream) {
                        Some(DlcOperand::Stream(s)) => PushSource::Stream(s.clone()),
                        Some(DlcOperand::Ite(t)) => PushSource::IteBase(*t),
                        _ => {
                            self.err(format!("conversion reads unlowered stream `{}`", tv.stream));
                            continue;
                        }
                    };
                    let width = tv.padded.unwrap_or(1);
                    self.marshals.push(MarshalOp::Push {
                        source,
                        tu: token.tu,
                        event: scalar_event,
                        width,
                    });
                    if width > 1 {
                        let pad_var = format!("{}_pad", tv.var);
                        body.push(CpuStmt::Pop {
                            ty: elem,
                            width,
                            var: pad_var.clone(),
                        });
                        body.push(CpuStmt::Assign {
                            ty: ValType::Scalar(elem),
                            var: tv.var.clone(),
                            value: CpuExpr::Lane {
                                var: pad_var,
                                lane: 0,
                            },
                        });
                    } else {
                        body.push(CpuStmt::Pop {
                            ty: elem,
                            width: 1,
                            var: tv.var.clone(),
                        });
                    }
                }
                ToValKind::Lane0 => {
                    let source = match self.map.get(&tv.stream) {
                        Some(DlcOperand::Ite(t)) => PushSource::IteBase(*t),
                        _ => {
                            self.err(format!(
                                "lane-0 conversion of non-induction stream `{}`",
                                tv.stream
                            ));
                            continue;
                        }
                    };
                    evar = Some(tv.var.clone());
                    self.marshals.push(MarshalOp::Push {
                        source,
                        tu: token.tu,
                        event: scalar_event,
                        width: 1,
                    });
                    body.push(CpuStmt::Pop {
                        ty: ElemType::Index,
                        width: 1,
                        var: tv.var.clone(),
                    });
                }
                ToValKind::Vector => {
                    let (elem, width) = match tv.ty {
                        ValType::Vec(e, w) => (e, w),
                        other => {
                            self.err(format!("vector conversion with type {other}"));
                            (ElemType::F32, 1)
                        }
                    };
                    let source = match self.map.get(&tv.stream) {
                        Some(DlcOperand::Stream(s)) => PushSource::Stream(s.clone()),
                        _ => {
                            self.err(format!("conversion reads unlowered stream `{}`", tv.stream));
                            continue;
                        }
                    };
                    self.marshals.push(MarshalOp::Push {
                        source,
                        tu: token.tu,
                        event: scalar_event,
                        width,
                    });
                    body.push(CpuStmt::Pop {
                        ty: elem,
                        width,
                        var: tv.var.clone(),
                    });
                }
                ToValKind::MaskRead => {
                    // Recomputed on the execute side from the popped element
                    // position and the static loop bound.
                    let (vlen, unit) = match tv.ty {
                        ValType::Mask(w) => (w, token.tu),
                        other => {
                            self.err(format!("mask conversion with type {other}"));
                            continue;
                        }
                    };
                    let bound = match self.units.get(unit).map(|u| u.ub.clone()) {
                        Some(DlcOperand::Lit(v)) => CpuExpr::int(v),
                        Some(DlcOperand::Scalar(s)) => CpuExpr::var(&s),
                        _ => {
                            self.err("mask bound is not static".into());
                            continue;
                        }
                    };
                    let offset = match &evar {
                        Some(e) => CpuExpr::var(e),
                        None => {
                            self.err("mask conversion without an element position".into());
                            continue;
                        }
                    };
                    body.push(CpuStmt::Assign {
                        ty: ValType::Mask(vlen),
                        var: tv.var.clone(),
                        value: CpuExpr::MaskRemainder {
                            vlen,
                            offset: Box::new(offset),
                            bound: Box::new(bound),
                        },
                    });
                }
                ToValKind::Buffer => {
                    buffer_vars.insert(tv.var.clone());
                }
            }
        }
        let _ = owner;
        self.marshals.push(MarshalOp::Trigger {
            tu: token.tu,
            event: token.event,
            at,
        });
        for s in &cb.stmts {
            body.push(self.rewrite_arm_stmt(s, &buffer_vars));
        }
        self.arms.push(Arm { token, body });
    }

    /// Copy a callback statement into the arm, turning buffered chunk reads
    /// into data-queue pops.
    fn rewrite_arm_stmt(&mut self, s: &CpuStmt, buffer_vars: &HashSet<String>) -> CpuStmt {
        match s {
            CpuStmt::Assign { ty, var, value } => {
                if let CpuExpr::Chunk {
                    var: bv, vlen: w, ..
                } = value
                {
                    if buffer_vars.contains(bv) {
                        let elem = match ty {
                            ValType::Vec(e, _) => *e,
                            _ => ElemType::F32,
                        };
                        return CpuStmt::Pop {
                            ty: elem,
                            width: *w,
                            var: var.clone(),
                        };
                    }
                }
                s.clone()
            }
            CpuStmt::For {
                var,
                lo,
                hi,
                step,
                body,
            } => CpuStmt::For {
                var: var.clone(),
                lo: lo.clone(),
                hi: hi.clone(),
                step: *step,
                body: body
                    .iter()
                    .map(|b| self.rewrite_arm_stmt(b, buffer_vars))
                    .collect(),
            },
            other => other.clone(),
        }
    }
}
