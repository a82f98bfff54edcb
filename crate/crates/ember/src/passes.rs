//! Global optimizations on the structured lookup-compute form: inner-loop
//! vectorization with masks, bufferization of whole embedding vectors,
//! queue alignment (induction elision + scalar padding), and model-specific
//! store streams and load hints. Every pass preserves the interpreted
//! semantics bit-exactly and degrades to a diagnosed no-op when its
//! preconditions fail.

use crate::cpu::{CpuExpr, CpuStmt};
use crate::slc::{
    Callback, CarriedVar, IndexOperand, LoadHint, Operand, RangeRef, SlcFunction, SlcItem,
    SlcLoop, StreamKind, ToVal, ToValKind,
};
use crate::types::{BinOp, ElemType, ValType};
use std::collections::{BTreeMap, HashSet};

/// Pass selection. Optimization levels are cumulative: 1 adds vectorization,
/// 2 adds bufferization, 3 adds queue alignment.
#[derive(Debug, Clone)]
pub struct PassConfig {
    pub opt: u8,
    pub vlen: u32,
    pub store_streams: bool,
    pub hints: BTreeMap<String, LoadHint>,
}

impl Default for PassConfig {
    fn default() -> Self {
        PassConfig {
            opt: 0,
            vlen: 8,
            store_streams: false,
            hints: BTreeMap::new(),
        }
    }
}

/// A pass that did not apply reports why; the input is returned unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct PassNote {
    pub pass: &'static str,
    pub reason: String,
}

/// Run the configured pass pipeline. Store-stream conversion runs first (the
/// copy shape is easiest to match before restructuring), then vectorize,
/// bufferize, align, and finally load-hint annotation.
pub fn run_passes(f: &SlcFunction, cfg: &PassConfig) -> (SlcFunction, Vec<PassNote>) {
    let mut notes = Vec::new();
    let mut cur = f.clone();
    if cfg.store_streams {
        let (next, note) = convert_store_streams(&cur);
        cur = next;
        if let Some(reason) = note {
            notes.push(PassNote {
                pass: "store-streams",
                reason,
            });
        }
    }
    if cfg.opt >= 1 {
        let (next, note) = vectorize(&cur, cfg.vlen);
        cur = next;
        if let Some(reason) = note {
            notes.push(PassNote {
                pass: "vectorize",
                reason,
            });
        }
    }
    if cfg.opt >= 2 {
        let (next, note) = bufferize(&cur);
        cur = next;
        if let Some(reason) = note {
            notes.push(PassNote {
                pass: "bufferize",
                reason,
            });
        }
    }
    if cfg.opt >= 3 {
        let (next, note) = align_queues(&cur);
        cur = next;
        if let Some(reason) = note {
            notes.push(PassNote {
                pass: "align",
                reason,
            });
        }
    }
    if !cfg.hints.is_empty() {
        cur = apply_load_hints(&cur, &cfg.hints);
    }
    (cur, notes)
}

// ---------------------------------------------------------------------------
// Vectorization
// ---------------------------------------------------------------------------

/// Vectorize the innermost loop with the given width. Legal iff every
/// callback of that loop vectorizes under the conservative whitelist:
/// elementwise arithmetic, loads/stores whose fastest-varying index is the
/// inner induction variable, and reductions over the inner variable.
pub fn vectorize(f: &SlcFunction, vlen: u32) -> (SlcFunction, Option<String>) {
    if vlen <= 1 {
        // Degenerate width: scalar execution is already the vector-of-one
        // semantics, bit for bit.
        return (f.clone(), None);
    }
    let mut out = f.clone();
    let Some(chain_len) = (!f.loop_chain().is_empty()).then(|| f.loop_chain().len()) else {
        return (out, Some("no loop nest to vectorize".into()));
    };
    let inner = innermost_mut(&mut out, chain_len);
    if inner.vlen.is_some() {
        return (f.clone(), Some("inner loop is already vectorized".into()));
    }
    if inner.step != 1 {
        return (f.clone(), Some("inner loop stride is not 1".into()));
    }
    if matches!(inner.lo, RangeRef::Stream(_)) || matches!(inner.hi, RangeRef::Stream(_)) {
        return (
            f.clone(),
            Some("inner loop bounds must be static for masked execution".into()),
        );
    }
    // Dry-run the callback rewrite.
    let ind = inner.stream.clone();
    let vec_streams: HashSet<String> = inner
        .decls()
        .filter(|d| stream_will_widen(d, &ind))
        .map(|d| d.name.clone())
        .collect();
    if let Some(SlcItem::Call(cb)) = inner
        .items
        .iter()
        .find(|i| matches!(i, SlcItem::Call(_)))
    {
        if let Err(reason) = rewrite_callback(cb, &ind, &vec_streams, vlen, "msk", "m", true) {
            return (f.clone(), Some(reason));
        }
    }

    // Commit: widen the loop, its streams, and its callback.
    let mask = unique_name(f, "msk");
    let mask_var = unique_name(f, "m");
    inner.vlen = Some(vlen);
    inner.mask = Some(mask.clone());
    let ind = inner.stream.clone();
    for item in inner.items.iter_mut() {
        match item {
            SlcItem::Decl(d) => widen_decl(d, &ind, &vec_streams, vlen, &mask),
            SlcItem::StoreStream { width, mask: m, .. } => {
                *width = vlen;
                *m = Some(mask.clone());
            }
            _ => {}
        }
    }
    for item in inner.items.iter_mut() {
        if let SlcItem::Call(cb) = item {
            let rewritten = rewrite_callback(cb, &ind, &vec_streams, vlen, &mask, &mask_var, false)
                .expect("dry run succeeded");
            *cb = rewritten;
        }
    }
    (out, None)
}

fn innermost_mut(f: &mut SlcFunction, depth: usize) -> &mut SlcLoop {
    let mut cur = f.root_loop_mut().expect("loop nest present");
    for _ in 1..depth {
        cur = cur.inner_loop_mut().expect("chain length");
    }
    cur
}

/// Will this inner-level stream widen? Loads widen when any index operand
/// rides the induction (or another widened stream); ALU streams widen with
/// their operands.
fn stream_will_widen(d: &crate::slc::StreamDecl, ind: &str) -> bool {
    fn op_uses(o: &Operand, ind: &str) -> bool {
        matches!(o, Operand::Stream(s) if s == ind)
    }
    match &d.kind {
        StreamKind::Load { idx, .. } => idx.iter().any(|i| op_uses(&i.base, ind)),
        StreamKind::Alu { lhs, rhs, .. } => op_uses(lhs, ind) || op_uses(rhs, ind),
        StreamKind::Buf { .. } => false,
    }
}

fn widen_decl(
    d: &mut crate::slc::StreamDecl,
    _ind: &str,
    vec_streams: &HashSet<String>,
    vlen: u32,
    mask: &str,
) {
    if !vec_streams.contains(&d.name) {
        return;
    }
    match &mut d.kind {
        StreamKind::Load {
            width, mask: m, ..
        } => {
            *width = vlen;
            *m = Some(mask.to_string());
        }
        StreamKind::Alu { width, .. } => {
            *width = vlen;
        }
        StreamKind::Buf { .. } => {}
    }
}

/// Rewrite (or, in `dry` mode, only validate) one inner-loop callback.
fn rewrite_callback(
    cb: &Callback,
    ind: &str,
    vec_streams: &HashSet<String>,
    vlen: u32,
    mask_stream: &str,
    mask_var: &str,
    dry: bool,
) -> Result<Callback, String> {
    let mut evar: Option<String> = None;
    let mut vecness: HashSet<String> = HashSet::new();
    let mut tovals = Vec::new();
    for tv in &cb.tovals {
        if tv.stream == ind {
            evar = Some(tv.var.clone());
            tovals.push(ToVal {
                kind: ToValKind::Lane0,
                ..tv.clone()
            });
        } else if vec_streams.contains(&tv.stream) {
            let elem = match tv.ty {
                ValType::Scalar(e) => e,
                other => return Err(format!("conversion `{}` has type {other}", tv.var)),
            };
            vecness.insert(tv.var.clone());
            tovals.push(ToVal {
                var: tv.var.clone(),
                ty: ValType::Vec(elem, vlen),
                stream: tv.stream.clone(),
                kind: ToValKind::Vector,
                padded: None,
            });
        } else {
            tovals.push(tv.clone());
        }
    }
    let mut used_mask = false;
    let mut stmts = Vec::new();
    for s in &cb.stmts {
        stmts.push(rewrite_stmt(
            s, &evar, &mut vecness, vlen, mask_var, &mut used_mask,
        )?);
    }
    if used_mask {
        if evar.is_none() {
            // The execute side rebuilds the mask from the element position,
            // so a masked callback always converts it even when the original
            // compute never read it.
            let var = fresh_in_callback(cb, "e");
            tovals.push(ToVal {
                var,
                ty: ValType::Scalar(ElemType::Index),
                stream: ind.to_string(),
                kind: ToValKind::Lane0,
                padded: None,
            });
        }
        tovals.push(ToVal {
            var: mask_var.to_string(),
            ty: ValType::Mask(vlen),
            stream: mask_stream.to_string(),
            kind: ToValKind::MaskRead,
            padded: None,
        });
    }
    if dry {
        return Ok(cb.clone());
    }
    Ok(Callback { tovals, stmts })
}

fn fresh_in_callback(cb: &Callback, hint: &str) -> String {
    let mut taken: HashSet<String> = cb.tovals.iter().map(|t| t.var.clone()).collect();
    collect_assigned(&cb.stmts, &mut taken);
    if !taken.contains(hint) {
        return hint.to_string();
    }
    let mut k = 0;
    loop {
        let cand = format!("{hint}{k}");
        if !taken.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}

fn collect_assigned(stmts: &[CpuStmt], out: &mut HashSet<String>) {
    for s in stmts {
        match s {
            CpuStmt::Assign { var, .. } | CpuStmt::Pop { var, .. } => {
                out.insert(var.clone());
            }
            CpuStmt::For { var, body, .. } => {
                out.insert(var.clone());
                collect_assigned(body, out);
            }
            _ => {}
        }
    }
}

fn rewrite_stmt(
    s: &CpuStmt,
    evar: &Option<String>,
    vecness: &mut HashSet<String>,
    vlen: u32,
    mask: &str,
    used_mask: &mut bool,
) -> Result<CpuStmt, String> {
    match s {
        CpuStmt::Assign { ty, var, value } => {
            let (v, is_vec) = rewrite_expr(value, evar, vecness, vlen, mask, used_mask)?;
            let ty = match (*ty, is_vec) {
                (ValType::Scalar(e), true) => {
                    if e == ElemType::Index {
                        return Err(format!(
                            "index computation `{var}` depends on the vector lane"
                        ));
                    }
                    vecness.insert(var.clone());
                    ValType::Vec(e, vlen)
                }
                (t, _) => t,
            };
            Ok(CpuStmt::Assign {
                ty,
                var: var.clone(),
                value: v,
            })
        }
        CpuStmt::Store { mem, idx, value } => {
            let contiguous = idx
                .last()
                .map(|e| matches!((e, evar), (CpuExpr::Var(v), Some(ev)) if v == ev))
                .unwrap_or(false);
            let lead_ok = idx[..idx.len().saturating_sub(1)]
                .iter()
                .all(|e| !expr_uses_lane(e, evar, vecness));
            if contiguous && lead_ok {
                let (v, _) = rewrite_expr(value, evar, vecness, vlen, mask, used_mask)?;
                *used_mask = true;
                return Ok(CpuStmt::VStore {
                    mem: mem.clone(),
                    idx: idx.clone(),
                    value: v,
                    vlen,
                    mask: Some(mask.to_string()),
                });
            }
            if idx.iter().any(|e| expr_uses_lane(e, evar, vecness)) {
                return Err(format!(
                    "store into `{mem}` does not keep the inner variable in the \
                     fastest-varying position"
                ));
            }
            // All-outer address: a reduction over the inner variable.
            let (v, is_vec) = rewrite_expr(value, evar, vecness, vlen, mask, used_mask)?;
            if !is_vec {
                return Ok(CpuStmt::Store {
                    mem: mem.clone(),
                    idx: idx.clone(),
                    value: v,
                });
            }
            let reduced = make_reduction(v, vecness, mask, used_mask).ok_or_else(|| {
                format!("store into `{mem}` mixes lanes in a shape that is not a reduction")
            })?;
            Ok(CpuStmt::Store {
                mem: mem.clone(),
                idx: idx.clone(),
                value: reduced,
            })
        }
        CpuStmt::For { .. } => Err("callback loops cannot be vectorized".into()),
        CpuStmt::Bump { .. } => Err("counter updates cannot be vectorized".into()),
        CpuStmt::Pop { .. } => Err("unexpected pop in a callback".into()),
        CpuStmt::VStore { .. } => Err("callback is already vectorized".into()),
    }
}

/// Split `a + rest` where exactly one side stays scalar: the scalar side
/// seeds an ordered lane fold of the vector side.
fn make_reduction(
    value: CpuExpr,
    vecness: &HashSet<String>,
    mask: &str,
    used_mask: &mut bool,
) -> Option<CpuExpr> {
    if let CpuExpr::Bin {
        op: BinOp::Add,
        lhs,
        rhs,
    } = &value
    {
        let lv = rewritten_is_vec(lhs, vecness);
        let rv = rewritten_is_vec(rhs, vecness);
        let (scalar, vector) = match (lv, rv) {
            (false, true) => (lhs.clone(), rhs.clone()),
            (true, false) => (rhs.clone(), lhs.clone()),
            _ => return None,
        };
        *used_mask = true;
        return Some(CpuExpr::ReduceAdd {
            init: scalar,
            v: vector,
            mask: Some(mask.to_string()),
        });
    }
    None
}

/// Vector-shapedness of an already-rewritten expression.
fn rewritten_is_vec(e: &CpuExpr, vecness: &HashSet<String>) -> bool {
    match e {
        CpuExpr::VLoad { .. } | CpuExpr::Chunk { .. } => true,
        CpuExpr::Var(v) => vecness.contains(v),
        CpuExpr::Bin { lhs, rhs, .. } => {
            rewritten_is_vec(lhs, vecness) || rewritten_is_vec(rhs, vecness)
        }
        _ => false,
    }
}

fn expr_uses_lane(e: &CpuExpr, evar: &Option<String>, vecness: &HashSet<String>) -> bool {
    match e {
        CpuExpr::Var(v) => Some(v) == evar.as_ref() || vecness.contains(v),
        CpuExpr::Bin { lhs, rhs, .. } => {
            expr_uses_lane(lhs, evar, vecness) || expr_uses_lane(rhs, evar, vecness)
        }
        CpuExpr::Load { idx, .. } | CpuExpr::VLoad { idx, .. } => {
            idx.iter().any(|i| expr_uses_lane(i, evar, vecness))
        }
        CpuExpr::ReduceAdd { init, v, .. } => {
            expr_uses_lane(init, evar, vecness) || expr_uses_lane(v, evar, vecness)
        }
        _ => false,
    }
}

/// Rewrite an expression, returning the new expression and whether it is
/// vector-shaped.
fn rewrite_expr(
    e: &CpuExpr,
    evar: &Option<String>,
    vecness: &HashSet<String>,
    vlen: u32,
    mask: &str,
    used_mask: &mut bool,
) -> Result<(CpuExpr, bool), String> {
    match e {
        CpuExpr::Lit(_) => Ok((e.clone(), false)),
        CpuExpr::Var(v) => Ok((e.clone(), vecness.contains(v))),
        CpuExpr::Load { mem, idx } => {
            let contiguous = idx
                .last()
                .map(|x| matches!((x, evar), (CpuExpr::Var(v), Some(ev)) if v == ev))
                .unwrap_or(false);
            let lead_ok = idx[..idx.len().saturating_sub(1)]
                .iter()
                .all(|x| !expr_uses_lane(x, evar, vecness));
            if contiguous && lead_ok {
                *used_mask = true;
                return Ok((
                    CpuExpr::VLoad {
                        mem: mem.clone(),
                        idx: idx.clone(),
                        vlen,
                        mask: Some(mask.to_string()),
                    },
                    true,
                ));
            }
            if idx.iter().any(|x| expr_uses_lane(x, evar, vecness)) {
                return Err(format!(
                    "load from `{mem}` does not keep the inner variable in the \
                     fastest-varying position"
                ));
            }
            Ok((e.clone(), false))
        }
        CpuExpr::Bin { op, lhs, rhs } => {
            let (l, lv) = rewrite_expr(lhs, evar, vecness, vlen, mask, used_mask)?;
            let (r, rv) = rewrite_expr(rhs, evar, vecness, vlen, mask, used_mask)?;
            Ok((CpuExpr::bin(*op, l, r), lv || rv))
        }
        CpuExpr::VLoad { .. }
        | CpuExpr::Lane { .. }
        | CpuExpr::Chunk { .. }
        | CpuExpr::ReduceAdd { .. }
        | CpuExpr::MaskRemainder { .. } => Err("callback is already vectorized".into()),
    }
}

// ---------------------------------------------------------------------------
// Bufferization
// ---------------------------------------------------------------------------

/// Move the inner-loop callback after the loop: the loop body pushes each
/// loaded vector chunk into a buffer stream, and the relocated callback
/// drains whole embedding vectors with a scalar loop stepping by the vector
/// width. One callback trigger per embedding vector.
pub fn bufferize(f: &SlcFunction) -> (SlcFunction, Option<String>) {
    let chain = f.loop_chain();
    let depth = chain.len();
    if depth < 2 {
        return (f.clone(), Some("no parent loop to hold the buffer".into()));
    }
    let inner = chain[depth - 1];
    let Some(vlen) = inner.vlen else {
        return (f.clone(), Some("inner loop is not vectorized".into()));
    };
    let Some(cb) = inner.end_call() else {
        return (
            f.clone(),
            Some("inner loop has no callback to bufferize".into()),
        );
    };
    if inner.begin_call().is_some() {
        return (f.clone(), Some("inner loop has a begin callback".into()));
    }
    if cb.tovals.iter().any(|t| t.kind == ToValKind::Buffer) {
        return (f.clone(), Some("function is already bufferized".into()));
    }
    let hi_expr = match &inner.hi {
        RangeRef::Lit(v) => CpuExpr::int(*v),
        RangeRef::Var(v) => CpuExpr::var(v),
        RangeRef::Stream(_) => {
            return (f.clone(), Some("inner bound is not static".into()));
        }
    };
    let lo_expr = match &inner.lo {
        RangeRef::Lit(v) => CpuExpr::int(*v),
        RangeRef::Var(v) => CpuExpr::var(v),
        RangeRef::Stream(_) => {
            return (f.clone(), Some("inner bound is not static".into()));
        }
    };
    // The value streams to buffer: vector conversions over inner streams.
    let value_tovals: Vec<ToVal> = cb
        .tovals
        .iter()
        .filter(|t| t.kind == ToValKind::Vector)
        .cloned()
        .collect();
    if value_tovals.is_empty() {
        return (
            f.clone(),
            Some("callback consumes no vector value stream".into()),
        );
    }
    let parent_has_end = chain[depth - 2].end_call().is_some();
    if parent_has_end {
        return (
            f.clone(),
            Some("parent loop already has an end callback".into()),
        );
    }
    let evar = cb
        .tovals
        .iter()
        .find(|t| t.kind == ToValKind::Lane0 && t.stream == inner.stream)
        .map(|t| t.var.clone());
    let mask_var = cb
        .tovals
        .iter()
        .find(|t| t.kind == ToValKind::MaskRead)
        .map(|t| t.var.clone());

    // Build the drained callback.
    let drain_var = evar.unwrap_or_else(|| unique_name(f, "e"));
    let mut drain_body: Vec<CpuStmt> = Vec::new();
    if let Some(m) = &mask_var {
        drain_body.push(CpuStmt::Assign {
            ty: ValType::Mask(vlen),
            var: m.clone(),
            value: CpuExpr::MaskRemainder {
                vlen,
                offset: Box::new(CpuExpr::var(&drain_var)),
                bound: Box::new(hi_expr.clone()),
            },
        });
    }
    let mut new_tovals: Vec<ToVal> = Vec::new();
    for tv in &cb.tovals {
        match tv.kind {
            ToValKind::Scalar => new_tovals.push(tv.clone()),
            ToValKind::Lane0 | ToValKind::MaskRead => {}
            ToValKind::Vector => {
                let elem = match tv.ty {
                    ValType::Vec(e, _) => e,
                    _ => ElemType::F32,
                };
                let buf_name = format!("buf_{}", tv.stream);
                new_tovals.push(ToVal {
                    var: format!("bv_{}", tv.var),
                    ty: ValType::Chunks(elem, vlen),
                    stream: buf_name,
                    kind: ToValKind::Buffer,
                    padded: None,
                });
                drain_body.push(CpuStmt::Assign {
                    ty: ValType::Vec(elem, vlen),
                    var: tv.var.clone(),
                    value: CpuExpr::Chunk {
                        var: format!("bv_{}", tv.var),
                        pos: Box::new(CpuExpr::var(&drain_var)),
                        vlen,
                    },
                });
            }
            ToValKind::Buffer => unreachable!("checked above"),
        }
    }
    drain_body.extend(cb.stmts.iter().cloned());
    let drained = Callback {
        tovals: new_tovals,
        stmts: vec![CpuStmt::For {
            var: drain_var,
            lo: lo_expr,
            hi: hi_expr,
            step: vlen as u64,
            body: drain_body,
        }],
    };

    // Commit on a fresh clone.
    let mut out = f.clone();
    let parent = nth_loop_mut(&mut out, depth - 2);
    // Buffer declarations precede the inner loop.
    let mut buf_decls: Vec<SlcItem> = Vec::new();
    for tv in &value_tovals {
        let elem = match tv.ty {
            ValType::Vec(e, _) => e,
            _ => ElemType::F32,
        };
        buf_decls.push(SlcItem::Decl(crate::slc::StreamDecl {
            name: format!("buf_{}", tv.stream),
            kind: StreamKind::Buf { elem, vlen },
        }));
    }
    let loop_pos = parent
        .items
        .iter()
        .position(|i| matches!(i, SlcItem::Loop(_)))
        .expect("parent holds the inner loop");
    for (k, d) in buf_decls.into_iter().enumerate() {
        parent.items.insert(loop_pos + k, d);
    }
    // Rewrite the inner loop: drop the callback, push the value streams.
    let inner = parent.inner_loop_mut().unwrap();
    inner.items.retain(|i| !matches!(i, SlcItem::Call(_)));
    for tv in &value_tovals {
        inner.items.push(SlcItem::Push {
            buf: format!("buf_{}", tv.stream),
            src: tv.stream.clone(),
        });
    }
    // The drained callback follows the inner loop.
    parent.items.push(SlcItem::Call(drained));
    (out, None)
}

fn nth_loop_mut(f: &mut SlcFunction, depth: usize) -> &mut SlcLoop {
    let mut cur = f.root_loop_mut().expect("loop nest present");
    for _ in 0..depth {
        cur = cur.inner_loop_mut().expect("chain length");
    }
    cur
}

// ---------------------------------------------------------------------------
// Queue alignment
// ---------------------------------------------------------------------------

/// Elide scalar conversions that only read the outermost loop's induction
/// stream: a loop-carried counter replaces them and an end-callback of the
/// child loop increments it. Remaining scalar conversions are flagged
/// pad-to-vector so the data queue keeps vector alignment.
pub fn align_queues(f: &SlcFunction) -> (SlcFunction, Option<String>) {
    let mut out = f.clone();
    let vlen = f
        .loop_chain()
        .last()
        .and_then(|l| l.vlen)
        .unwrap_or(1);
    let Some(root) = out.root_loop_mut() else {
        return (f.clone(), Some("no loop nest to align".into()));
    };
    let root_stream = root.stream.clone();
    let root_step = root.step;
    let root_lo = match root.lo {
        RangeRef::Lit(v) => Some(v),
        _ => None,
    };

    // Collect elidable conversion variables from every callback.
    let mut elided: Vec<String> = Vec::new();
    let mut padded = 0usize;
    visit_callbacks_mut(&mut root.items, &mut |cb| {
        cb.tovals.retain(|tv| {
            if tv.kind == ToValKind::Scalar && tv.stream == root_stream && root_lo.is_some() {
                if !elided.contains(&tv.var) {
                    elided.push(tv.var.clone());
                }
                false
            } else {
                true
            }
        });
        for tv in cb.tovals.iter_mut() {
            if tv.kind == ToValKind::Scalar && tv.padded.is_none() {
                tv.padded = Some(vlen);
                padded += 1;
            }
        }
    });
    if elided.is_empty() && padded == 0 {
        return (f.clone(), Some("no scalar conversions to align".into()));
    }
    for var in &elided {
        root.carried.push(CarriedVar {
            name: var.clone(),
            init: root_lo.unwrap_or(0),
        });
    }
    if !elided.is_empty() {
        // The increment lives in the end-callback after the root's child
        // loop; create it if missing.
        let has_child = root.inner_loop().is_some();
        if !has_child {
            return (f.clone(), Some("root loop has no child loop".into()));
        }
        let loop_pos = root
            .items
            .iter()
            .position(|i| matches!(i, SlcItem::Loop(_)))
            .unwrap();
        let end_cb = root.items[loop_pos + 1..]
            .iter_mut()
            .find_map(|i| match i {
                SlcItem::Call(c) => Some(c),
                _ => None,
            });
        let bumps: Vec<CpuStmt> = elided
            .iter()
            .map(|v| CpuStmt::Bump {
                var: v.clone(),
                delta: root_step,
            })
            .collect();
        match end_cb {
            Some(cb) => cb.stmts.extend(bumps),
            None => root.items.push(SlcItem::Call(Callback {
                tovals: Vec::new(),
                stmts: bumps,
            })),
        }
    }
    (out, None)
}

fn visit_callbacks_mut(items: &mut [SlcItem], f: &mut dyn FnMut(&mut Callback)) {
    for it in items {
        match it {
            SlcItem::Call(c) => f(c),
            SlcItem::Loop(l) => visit_callbacks_mut(&mut l.items, f),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Model-specific stream hints
// ---------------------------------------------------------------------------

/// Replace pure-copy callbacks by direct store streams: the access side
/// writes gathered values straight to memory and the callback disappears.
pub fn convert_store_streams(f: &SlcFunction) -> (SlcFunction, Option<String>) {
    let mut out = f.clone();
    let mut converted = 0usize;
    let mut ineligible: Option<String> = None;
    convert_in_items(&mut out.items, &mut converted, &mut ineligible);
    if converted == 0 {
        let reason = ineligible
            .unwrap_or_else(|| "no copy-shaped callback eligible for store streams".into());
        return (f.clone(), Some(reason));
    }
    (out, None)
}

fn convert_in_items(items: &mut [SlcItem], converted: &mut usize, ineligible: &mut Option<String>) {
    for it in items.iter_mut() {
        if let SlcItem::Loop(l) = it {
            convert_in_loop(l, converted, ineligible);
        }
    }
}

fn convert_in_loop(l: &mut SlcLoop, converted: &mut usize, ineligible: &mut Option<String>) {
    for it in l.items.iter_mut() {
        if let SlcItem::Loop(inner) = it {
            convert_in_loop(inner, converted, ineligible);
        }
    }
    // Leaf callback only.
    if l.inner_loop().is_some() {
        return;
    }
    let Some(pos) = l.items.iter().position(|i| matches!(i, SlcItem::Call(_))) else {
        return;
    };
    let SlcItem::Call(cb) = &l.items[pos] else {
        unreachable!()
    };
    match copy_shape(cb, l) {
        Ok(store) => {
            l.items[pos] = store;
            *converted += 1;
        }
        Err(reason) => {
            if ineligible.is_none() {
                *ineligible = Some(reason);
            }
        }
    }
}

/// A copy callback stores exactly one converted stream value at an address
/// built from converted streams (or the loop induction); nothing else.
fn copy_shape(cb: &Callback, l: &SlcLoop) -> Result<SlcItem, String> {
    if cb.stmts.len() != 1 {
        return Err("callback is not a single copy statement".into());
    }
    let toval_stream = |var: &str| -> Option<&ToVal> { cb.tovals.iter().find(|t| t.var == var) };
    let as_operand = |e: &CpuExpr| -> Result<IndexOperand, String> {
        match e {
            CpuExpr::Var(v) => {
                let tv = toval_stream(v).ok_or_else(|| format!("address uses non-stream `{v}`"))?;
                Ok(IndexOperand {
                    base: Operand::Stream(tv.stream.clone()),
                    offset: 0,
                })
            }
            CpuExpr::Lit(crate::types::Lit::Int(k)) => Ok(IndexOperand {
                base: Operand::Lit(*k),
                offset: 0,
            }),
            _ => Err("address is not stream-computable".into()),
        }
    };
    match &cb.stmts[0] {
        CpuStmt::Store { mem, idx, value } => {
            let CpuExpr::Var(v) = value else {
                return Err("copied value is not a plain stream conversion".into());
            };
            let tv = toval_stream(v).ok_or("copied value is not a conversion")?;
            if tv.stream == l.stream {
                return Err("copied value is the induction stream".into());
            }
            let ops = idx.iter().map(as_operand).collect::<Result<Vec<_>, _>>()?;
            Ok(SlcItem::StoreStream {
                mem: mem.clone(),
                idx: ops,
                value: tv.stream.clone(),
                width: 1,
                mask: None,
            })
        }
        CpuStmt::VStore {
            mem,
            idx,
            value,
            vlen,
            ..
        } => {
            let CpuExpr::Var(v) = value else {
                return Err("copied value is not a plain stream conversion".into());
            };
            let tv = toval_stream(v).ok_or("copied value is not a conversion")?;
            let ops = idx.iter().map(as_operand).collect::<Result<Vec<_>, _>>()?;
            Ok(SlcItem::StoreStream {
                mem: mem.clone(),
                idx: ops,
                value: tv.stream.clone(),
                width: *vlen,
                mask: l.mask.clone(),
            })
        }
        _ => Err("callback is not a single copy statement".into()),
    }
}

/// Annotate load streams with cache level and temporality. Semantics-free;
/// only the VM's cache model consumes them.
pub fn apply_load_hints(f: &SlcFunction, hints: &BTreeMap<String, LoadHint>) -> SlcFunction {
    let mut out = f.clone();
    fn walk(items: &mut [SlcItem], hints: &BTreeMap<String, LoadHint>) {
        for it in items {
            match it {
                SlcItem::Decl(d) => {
                    if let StreamKind::Load { mem, hint, .. } = &mut d.kind {
                        if let Some(h) = hints.get(mem) {
                            *hint = Some(*h);
                        }
                    }
                }
                SlcItem::Loop(l) => walk(&mut l.items, hints),
                _ => {}
            }
        }
    }
    walk(&mut out.items, hints);
    out
}

fn unique_name(f: &SlcFunction, hint: &str) -> String {
    let mut names: HashSet<String> = f.params.iter().map(|p| p.name().to_string()).collect();
    fn collect(items: &[SlcItem], names: &mut HashSet<String>) {
        for it in items {
            match it {
                SlcItem::Decl(d) => {
                    names.insert(d.name.clone());
                }
                SlcItem::Loop(l) => {
                    names.insert(l.stream.clone());
                    if let Some(m) = &l.mask {
                        names.insert(m.clone());
                    }
                    for cv in &l.carried {
                        names.insert(cv.name.clone());
                    }
                    collect(&l.items, names);
                }
                SlcItem::Call(c) => {
                    for tv in &c.tovals {
                        names.insert(tv.var.clone());
                    }
                }
                _ => {}
            }
        }
    }
    collect(&f.items, &mut names);
    if !names.contains(hint) {
        return hint.to_string();
    }
    let mut k = 0;
    loop {
        let cand = format!("{hint}{k}");
        if !names.contains(&cand) {
            return cand;
        }
        k += 1;
    }
}
