//! Loop classification and lowering from the imperative front end to the
//! structured lookup-compute IR.
//!
//! A loop is an offloading candidate when (1) its bounds are static scalars,
//! literals, or values produced by an enclosing candidate, and (2) its
//! subtree performs the function's first load of some read-only memref.
//! Loops that only touch partial or already-read results (or perform no
//! loads at all) are workspace loops and stay on the execute side; loops
//! failing (1) are rejected and also stay callback-resident. Two candidates
//! at one nesting level is a hard error: the sparse-dense multiplication
//! family never produces that shape.

use crate::cpu::{CpuExpr, CpuStmt};
use crate::diag::{Diag, Diags};
use crate::scf::{walk_exprs, ScfExpr, ScfFunction, ScfStmt};
use crate::slc::{
    Callback, IndexOperand, Operand, RangeRef, SlcFunction, SlcItem, SlcLoop, StreamDecl,
    StreamKind, ToVal, ToValKind,
};
use crate::types::{BinOp, ElemType, Lit, ValType};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopClass {
    Candidate,
    Workspace,
    Rejected(String),
}

impl LoopClass {
    fn as_str(&self) -> &str {
        match self {
            LoopClass::Candidate => "candidate",
            LoopClass::Workspace => "workspace",
            LoopClass::Rejected(_) => "rejected",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Classification {
    /// Loop path (induction variables joined with `/`) to class, in program
    /// order.
    pub loops: Vec<(String, LoopClass)>,
}

impl Classification {
    pub fn class_of(&self, path: &str) -> Option<&LoopClass> {
        self.loops.iter().find(|(p, _)| p == path).map(|(_, c)| c)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<serde_json::Value> = self
            .loops
            .iter()
            .map(|(p, c)| {
                let mut o = serde_json::json!({"path": p, "class": c.as_str()});
                if let LoopClass::Rejected(reason) = c {
                    o["reason"] = serde_json::json!(reason);
                }
                o
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "loops": entries })).unwrap()
    }
}

pub fn classify_loops(f: &ScfFunction) -> Result<Classification, Diags> {
    let (_, class) = decouple(f)?;
    Ok(class)
}

pub fn lower_scf_to_slc(f: &ScfFunction) -> Result<SlcFunction, Diags> {
    let (slc, _) = decouple(f)?;
    Ok(slc)
}

pub fn decouple(f: &ScfFunction) -> Result<(SlcFunction, Classification), Diags> {
    let rw = crate::scf::verify_scf(f)?;
    // Node pointer of the first load of each memref, in program order.
    let mut first_load: HashMap<String, *const ScfExpr> = HashMap::new();
    walk_exprs(&f.body, &mut |e| {
        if let ScfExpr::Load { mem, .. } = e {
            first_load.entry(mem.clone()).or_insert(e as *const ScfExpr);
        }
    });

    let mut lw = Lower {
        f,
        rw,
        first_load,
        class: Classification::default(),
        diags: Diags::default(),
        names: f.params.iter().map(|p| p.name().to_string()).collect(),
        types: HashMap::new(),
        binds: HashMap::new(),
        ancestor_direct_loads: Vec::new(),
    };
    let items = lw.level(&f.body, &[], true);
    if !lw.diags.is_empty() {
        return Err(lw.diags);
    }
    Ok((
        SlcFunction {
            name: f.name.clone(),
            params: f.params.clone(),
            items,
        },
        lw.class,
    ))
}

#[derive(Debug, Clone)]
enum VarBind {
    Stream(String),
    Lit(u64),
    Param(String),
}

struct Lower<'a> {
    f: &'a ScfFunction,
    rw: crate::scf::RwSets,
    first_load: HashMap<String, *const ScfExpr>,
    class: Classification,
    diags: Diags,
    names: HashSet<String>,
    /// Declared element types of locals and induction variables.
    types: HashMap<String, ElemType>,
    /// Offloaded value bindings, visible to nested levels.
    binds: HashMap<String, VarBind>,
    /// Memrefs loaded directly at each enclosing candidate level (innermost
    /// last); the current level is pushed before recursing.
    ancestor_direct_loads: Vec<BTreeSet<String>>,
}

impl<'a> Lower<'a> {
    fn fresh(&mut self, hint: &str) -> String {
        let mut name = hint.to_string();
        let mut k = 0;
        while !self.names.insert(name.clone()) {
            name = format!("{hint}_{k}");
            k += 1;
        }
        name
    }

    /// Process the direct statements of one candidate level (or the function
    /// top level) and produce its SLC items. Statements are processed in
    /// order so loop classification sees the offloaded bindings that precede
    /// each loop.
    fn level(&mut self, stmts: &'a [ScfStmt], path: &[String], top: bool) -> Vec<SlcItem> {
        let mut decls: Vec<SlcItem> = Vec::new();
        let mut group_before: Vec<&'a ScfStmt> = Vec::new();
        let mut group_after: Vec<&'a ScfStmt> = Vec::new();
        let mut nested: Option<SlcItem> = None;
        let mut declared_locals: Vec<String> = Vec::new();
        for s in stmts {
            if let ScfStmt::For {
                var,
                lo,
                hi,
                step,
                body,
                ..
            } = s
            {
                let mut p: Vec<String> = path.to_vec();
                p.push(var.clone());
                let pstr = p.join("/");
                let class = self.classify_one(lo, hi, body);
                match class {
                    LoopClass::Candidate => {
                        self.class.loops.push((pstr.clone(), LoopClass::Candidate));
                        if nested.is_some() {
                            self.diags.push(Diag::new(
                                pstr,
                                "two offloading candidates at one nesting level; this shape \
                                 is outside the sparse-dense multiplication family"
                                    .to_string(),
                            ));
                        } else {
                            nested = Some(self.candidate_loop(var, lo, hi, *step, body, path));
                        }
                    }
                    other => {
                        self.class.loops.push((pstr, other));
                        self.classify_descendants_workspace(body, &p);
                        if nested.is_some() {
                            group_after.push(s);
                        } else {
                            group_before.push(s);
                        }
                    }
                }
                continue;
            }
            match s {
                ScfStmt::Assign { ty, var, value, .. } => {
                    self.types.insert(var.clone(), *ty);
                    declared_locals.push(var.clone());
                    if !top && self.is_offloadable(value) {
                        let op = self.emit_offloadable(value, &format!("s_{var}"), &mut decls);
                        let bind = match op {
                            Operand::Stream(s) => VarBind::Stream(s),
                            Operand::Lit(v) => VarBind::Lit(v),
                            Operand::Var(p) => VarBind::Param(p),
                        };
                        self.binds.insert(var.clone(), bind);
                    } else if top
                        && matches!(value, ScfExpr::Const(Lit::Int(_)) | ScfExpr::Var(_))
                        && self.is_offloadable(value)
                    {
                        // Top-level constants alias directly; nothing owns a
                        // stream outside a traversal loop.
                        let bind = match value {
                            ScfExpr::Const(Lit::Int(v)) => VarBind::Lit(*v),
                            ScfExpr::Var(v) => match self.binds.get(v) {
                                Some(b) => b.clone(),
                                None => VarBind::Param(v.clone()),
                            },
                            _ => unreachable!(),
                        };
                        self.binds.insert(var.clone(), bind);
                    } else if nested.is_some() {
                        group_after.push(s);
                    } else {
                        group_before.push(s);
                    }
                }
                ScfStmt::Store { .. } => {
                    if nested.is_some() {
                        group_after.push(s);
                    } else {
                        group_before.push(s);
                    }
                }
                ScfStmt::For { .. } => unreachable!("handled above"),
            }
        }

        if top && nested.is_some() && (!group_before.is_empty() || !group_after.is_empty()) {
            self.diags.push(Diag::new(
                "fn".to_string(),
                "top-level compute statements alongside an offloaded loop are not supported"
                    .to_string(),
            ));
        }

        let mut items = decls;
        if !group_before.is_empty() {
            let cb = self.make_callback(&group_before);
            items.push(SlcItem::Call(cb));
        }
        if let Some(n) = nested {
            items.push(n);
        }
        if !group_after.is_empty() {
            let cb = self.make_callback(&group_after);
            items.push(SlcItem::Call(cb));
        }
        for l in declared_locals {
            self.types.remove(&l);
            self.binds.remove(&l);
        }
        items
    }

    fn candidate_loop(
        &mut self,
        var: &str,
        lo: &'a ScfExpr,
        hi: &'a ScfExpr,
        step: u64,
        body: &'a [ScfStmt],
        path: &[String],
    ) -> SlcItem {
        let stream = self.fresh(&format!("s_{var}"));
        self.types.insert(var.to_string(), ElemType::Index);
        self.binds
            .insert(var.to_string(), VarBind::Stream(stream.clone()));
        let lo_r = self.range_ref(lo, var);
        let hi_r = self.range_ref(hi, var);
        self.ancestor_direct_loads.push(direct_loads(body));
        let mut p: Vec<String> = path.to_vec();
        p.push(var.to_string());
        let items = self.level(body, &p, false);
        self.ancestor_direct_loads.pop();
        self.types.remove(var);
        self.binds.remove(var);
        SlcItem::Loop(SlcLoop {
            stream,
            mask: None,
            vlen: None,
            lo: lo_r,
            hi: hi_r,
            step,
            carried: Vec::new(),
            items,
        })
    }

    fn range_ref(&mut self, e: &ScfExpr, loopvar: &str) -> RangeRef {
        match e {
            ScfExpr::Const(Lit::Int(v)) => RangeRef::Lit(*v),
            ScfExpr::Var(v) => match self.binds.get(v) {
                Some(VarBind::Stream(s)) => RangeRef::Stream(s.clone()),
                Some(VarBind::Lit(k)) => RangeRef::Lit(*k),
                Some(VarBind::Param(p)) => RangeRef::Var(p.clone()),
                None if self.f.is_scalar_param(v) => RangeRef::Var(v.clone()),
                None => {
                    self.diags.push(Diag::new(
                        format!("for {loopvar}"),
                        format!("bound `{v}` is neither static nor produced by a candidate loop"),
                    ));
                    RangeRef::Lit(0)
                }
            },
            _ => {
                self.diags.push(Diag::new(
                    format!("for {loopvar}"),
                    "loop bounds must be literals, scalar parameters, or candidate-produced values"
                        .to_string(),
                ));
                RangeRef::Lit(0)
            }
        }
    }

    fn classify_one(&mut self, lo: &ScfExpr, hi: &ScfExpr, body: &[ScfStmt]) -> LoopClass {
        // Condition (2): the subtree performs the function's first load of
        // some read-only memref.
        let mut subtree_nodes: Vec<*const ScfExpr> = Vec::new();
        collect_load_nodes(body, &mut subtree_nodes);
        let mut subtree_mems: BTreeSet<String> = BTreeSet::new();
        collect_loads(body, &mut subtree_mems);
        let first_in_subtree = subtree_mems.iter().any(|m| {
            self.rw.read_only.contains(m)
                && self
                    .first_load
                    .get(m)
                    .map(|node| subtree_nodes.iter().any(|p| std::ptr::eq(*p, *node)))
                    .unwrap_or(false)
        });
        if !first_in_subtree {
            return LoopClass::Workspace;
        }
        // Condition (1): bounds static or candidate-produced.
        for b in [lo, hi] {
            let ok = match b {
                ScfExpr::Const(Lit::Int(_)) => true,
                ScfExpr::Var(v) => self.binds.contains_key(v) || self.f.is_scalar_param(v),
                _ => false,
            };
            if !ok {
                return LoopClass::Rejected(
                    "iteration bounds are neither static nor computed by an offloading candidate"
                        .to_string(),
                );
            }
        }
        LoopClass::Candidate
    }

    fn classify_descendants_workspace(&mut self, body: &[ScfStmt], path: &[String]) {
        for s in body {
            if let ScfStmt::For { var, body: b, .. } = s {
                let mut p = path.to_vec();
                p.push(var.clone());
                self.class.loops.push((p.join("/"), LoopClass::Workspace));
                self.classify_descendants_workspace(b, &p);
            }
        }
    }

    // -- Offloadability ------------------------------------------------------

    fn expr_type(&self, e: &ScfExpr) -> ElemType {
        match e {
            ScfExpr::Const(Lit::Int(_)) => ElemType::Index,
            ScfExpr::Const(Lit::F32(_)) => ElemType::F32,
            ScfExpr::Var(v) => self.types.get(v).copied().unwrap_or(ElemType::Index),
            ScfExpr::Load { mem, .. } => self.f.elem_of(mem).unwrap_or(ElemType::F32),
            ScfExpr::Binary { lhs, .. } => self.expr_type(lhs),
        }
    }

    fn is_offloadable(&self, e: &ScfExpr) -> bool {
        match e {
            ScfExpr::Const(Lit::Int(_)) => true,
            ScfExpr::Const(Lit::F32(_)) => false,
            ScfExpr::Var(v) => self.binds.contains_key(v) || self.f.is_scalar_param(v),
            ScfExpr::Load { mem, idx, .. } => {
                // Read-only and not already read by an enclosing level.
                self.rw.read_only.contains(mem)
                    && !self
                        .ancestor_direct_loads
                        .iter()
                        .rev()
                        .skip(1)
                        .any(|lv| lv.contains(mem))
                    && idx.iter().all(|i| self.is_offloadable(i))
            }
            ScfExpr::Binary { lhs, rhs, .. } => {
                self.expr_type(e) == ElemType::Index
                    && self.is_offloadable(lhs)
                    && self.is_offloadable(rhs)
            }
        }
    }

    fn try_operand(&self, e: &ScfExpr) -> Option<Operand> {
        match e {
            ScfExpr::Const(Lit::Int(v)) => Some(Operand::Lit(*v)),
            ScfExpr::Var(v) => match self.binds.get(v) {
                Some(VarBind::Stream(s)) => Some(Operand::Stream(s.clone())),
                Some(VarBind::Lit(k)) => Some(Operand::Lit(*k)),
                Some(VarBind::Param(p)) => Some(Operand::Var(p.clone())),
                None if self.f.is_scalar_param(v) => Some(Operand::Var(v.clone())),
                None => None,
            },
            _ => None,
        }
    }

    /// Index operand with the `base + literal` addressing form.
    fn emit_index_operand(
        &mut self,
        e: &ScfExpr,
        hint: &str,
        decls: &mut Vec<SlcItem>,
    ) -> IndexOperand {
        if let Some(op) = self.try_operand(e) {
            return IndexOperand {
                base: op,
                offset: 0,
            };
        }
        if let ScfExpr::Binary {
            op: BinOp::Add,
            lhs,
            rhs,
        } = e
        {
            if let (Some(base), ScfExpr::Const(Lit::Int(k))) = (self.try_operand(lhs), &**rhs) {
                return IndexOperand { base, offset: *k };
            }
        }
        let op = self.emit_offloadable(e, hint, decls);
        IndexOperand {
            base: op,
            offset: 0,
        }
    }

    fn emit_offloadable(&mut self, e: &ScfExpr, hint: &str, decls: &mut Vec<SlcItem>) -> Operand {
        if let Some(op) = self.try_operand(e) {
            return op;
        }
        match e {
            ScfExpr::Load { mem, idx, .. } => {
                let operands: Vec<IndexOperand> = idx
                    .iter()
                    .enumerate()
                    .map(|(k, i)| self.emit_index_operand(i, &format!("{hint}_i{k}"), decls))
                    .collect();
                let name = self.fresh(hint);
                decls.push(SlcItem::Decl(StreamDecl {
                    name: name.clone(),
                    kind: StreamKind::Load {
                        mem: mem.clone(),
                        idx: operands,
                        width: 1,
                        mask: None,
                        hint: None,
                    },
                }));
                Operand::Stream(name)
            }
            ScfExpr::Binary { op, lhs, rhs } => {
                let a = self.emit_offloadable(lhs, &format!("{hint}_a"), decls);
                let b = self.emit_offloadable(rhs, &format!("{hint}_b"), decls);
                let name = self.fresh(hint);
                decls.push(SlcItem::Decl(StreamDecl {
                    name: name.clone(),
                    kind: StreamKind::Alu {
                        op: *op,
                        lhs: a,
                        rhs: b,
                        width: 1,
                    },
                }));
                Operand::Stream(name)
            }
            _ => unreachable!("emit_offloadable on non-offloadable expression"),
        }
    }

    // -- Callback construction ------------------------------------------------

    fn make_callback(&mut self, stmts: &[&'a ScfStmt]) -> Callback {
        let mut body = Vec::new();
        for s in stmts {
            body.push(self.to_cpu_stmt(s));
        }
        // Stream-bound variables in first-use order become conversions.
        let mut order: Vec<String> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        collect_vars(&body, &mut |v| {
            if !seen.contains(v) && matches!(self.binds.get(v), Some(VarBind::Stream(_))) {
                seen.insert(v.to_string());
                order.push(v.to_string());
            }
        });
        let tovals = order
            .into_iter()
            .map(|v| {
                let stream = match self.binds.get(&v) {
                    Some(VarBind::Stream(s)) => s.clone(),
                    _ => unreachable!(),
                };
                let ty = self.types.get(&v).copied().unwrap_or(ElemType::Index);
                ToVal {
                    var: v,
                    ty: ValType::Scalar(ty),
                    stream,
                    kind: ToValKind::Scalar,
                    padded: None,
                }
            })
            .collect();
        Callback {
            tovals,
            stmts: body,
        }
    }

    fn to_cpu_stmt(&mut self, s: &ScfStmt) -> CpuStmt {
        match s {
            ScfStmt::Assign { ty, var, value, .. } => {
                self.types.insert(var.clone(), *ty);
                CpuStmt::Assign {
                    ty: ValType::Scalar(*ty),
                    var: var.clone(),
                    value: self.to_cpu_expr(value),
                }
            }
            ScfStmt::Store {
                mem, idx, value, ..
            } => CpuStmt::Store {
                mem: mem.clone(),
                idx: idx.iter().map(|e| self.to_cpu_expr(e)).collect(),
                value: self.to_cpu_expr(value),
            },
            ScfStmt::For {
                var,
                lo,
                hi,
                step,
                body,
                ..
            } => {
                self.types.insert(var.clone(), ElemType::Index);
                let lo = self.to_cpu_expr(lo);
                let hi = self.to_cpu_expr(hi);
                let body_cpu = body.iter().map(|s| self.to_cpu_stmt(s)).collect();
                CpuStmt::For {
                    var: var.clone(),
                    lo,
                    hi,
                    step: *step,
                    body: body_cpu,
                }
            }
        }
    }

    fn to_cpu_expr(&self, e: &ScfExpr) -> CpuExpr {
        match e {
            ScfExpr::Const(l) => CpuExpr::Lit(*l),
            ScfExpr::Var(v) => match self.binds.get(v) {
                Some(VarBind::Lit(k)) => CpuExpr::Lit(Lit::Int(*k)),
                Some(VarBind::Param(p)) => CpuExpr::Var(p.clone()),
                _ => CpuExpr::Var(v.clone()),
            },
            ScfExpr::Load { mem, idx, .. } => CpuExpr::Load {
                mem: mem.clone(),
                idx: idx.iter().map(|i| self.to_cpu_expr(i)).collect(),
            },
            ScfExpr::Binary { op, lhs, rhs } => {
                CpuExpr::bin(*op, self.to_cpu_expr(lhs), self.to_cpu_expr(rhs))
            }
        }
    }
}

fn direct_loads(body: &[ScfStmt]) -> BTreeSet<String> {
    fn expr(e: &ScfExpr, out: &mut BTreeSet<String>) {
        match e {
            ScfExpr::Load { mem, idx, .. } => {
                out.insert(mem.clone());
                for i in idx {
                    expr(i, out);
                }
            }
            ScfExpr::Binary { lhs, rhs, .. } => {
                expr(lhs, out);
                expr(rhs, out);
            }
            _ => {}
        }
    }
    let mut out = BTreeSet::new();
    for s in body {
        match s {
            ScfStmt::Assign { value, .. } => expr(value, &mut out),
            ScfStmt::Store { idx, value, .. } => {
                for i in idx {
                    expr(i, &mut out);
                }
                expr(value, &mut out);
            }
            // Nested loops are not "direct".
            ScfStmt::For { .. } => {}
        }
    }
    out
}

fn collect_loads(body: &[ScfStmt], out: &mut BTreeSet<String>) {
    walk_exprs_body(body, &mut |e| {
        if let ScfExpr::Load { mem, .. } = e {
            out.insert(mem.clone());
        }
    });
}

fn collect_load_nodes(body: &[ScfStmt], out: &mut Vec<*const ScfExpr>) {
    walk_exprs_body(body, &mut |e| {
        if matches!(e, ScfExpr::Load { .. }) {
            out.push(e as *const ScfExpr);
        }
    });
}

fn walk_exprs_body<'a>(stmts: &'a [ScfStmt], f: &mut dyn FnMut(&'a ScfExpr)) {
    fn expr<'a>(e: &'a ScfExpr, f: &mut dyn FnMut(&'a ScfExpr)) {
        f(e);
        match e {
            ScfExpr::Load { idx, .. } => {
                for i in idx {
                    expr(i, f);
                }
            }
            ScfExpr::Binary { lhs, rhs, .. } => {
                expr(lhs, f);
                expr(rhs, f);
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            ScfStmt::For { lo, hi, body, .. } => {
                expr(lo, f);
                expr(hi, f);
                walk_exprs_body(body, f);
            }
            ScfStmt::Assign { value, .. } => expr(value, f),
            ScfStmt::Store { idx, value, .. } => {
                for i in idx {
                    expr(i, f);
                }
                expr(value, f);
            }
        }
    }
}

fn collect_vars(stmts: &[CpuStmt], f: &mut dyn FnMut(&str)) {
    fn expr(e: &CpuExpr, f: &mut dyn FnMut(&str)) {
        match e {
            CpuExpr::Var(v) => f(v),
            CpuExpr::Bin { lhs, rhs, .. } => {
                expr(lhs, f);
                expr(rhs, f);
            }
            CpuExpr::Load { idx, .. } | CpuExpr::VLoad { idx, .. } => {
                for i in idx {
                    expr(i, f);
                }
            }
            CpuExpr::Chunk { pos, .. } => expr(pos, f),
            CpuExpr::ReduceAdd { init, v, .. } => {
                expr(init, f);
                expr(v, f);
            }
            CpuExpr::MaskRemainder { offset, bound, .. } => {
                expr(offset, f);
                expr(bound, f);
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            CpuStmt::Assign { value, .. } => expr(value, f),
            CpuStmt::Store { idx, value, .. } | CpuStmt::VStore { idx, value, .. } => {
                for i in idx {
                    expr(i, f);
                }
                expr(value, f);
            }
            CpuStmt::For { lo, hi, body, .. } => {
                expr(lo, f);
                expr(hi, f);
                collect_vars(body, f);
            }
            _ => {}
        }
    }
}

/// Static compute-per-lookup ratio: f32 arithmetic ops in callback-resident
/// code per stream-eligible f32 load in the innermost candidate loop.
pub fn compute_per_lookup(f: &ScfFunction) -> Result<(u32, u32), Diags> {
    let (slc, _) = decouple(f)?;
    let chain = slc.loop_chain();
    let lookups = chain
        .last()
        .map(|inner| {
            inner
                .decls()
                .filter(|d| {
                    matches!(&d.kind, StreamKind::Load { mem, .. }
                        if slc.memref(mem).map(|m| m.elem == ElemType::F32).unwrap_or(false))
                })
                .count() as u32
        })
        .unwrap_or(0);

    fn count_value_bins(e: &CpuExpr, ops: &mut u32) {
        match e {
            CpuExpr::Bin { lhs, rhs, .. } => {
                *ops += 1;
                count_value_bins(lhs, ops);
                count_value_bins(rhs, ops);
            }
            CpuExpr::ReduceAdd { init, v, .. } => {
                count_value_bins(init, ops);
                count_value_bins(v, ops);
            }
            _ => {}
        }
    }
    fn count_stmts(stmts: &[CpuStmt], ops: &mut u32) {
        for s in stmts {
            match s {
                CpuStmt::Assign { value, .. }
                | CpuStmt::Store { value, .. }
                | CpuStmt::VStore { value, .. } => count_value_bins(value, ops),
                CpuStmt::For { body, .. } => count_stmts(body, ops),
                _ => {}
            }
        }
    }
    fn walk_items(items: &[SlcItem], ops: &mut u32) {
        for it in items {
            match it {
                SlcItem::Call(c) => count_stmts(&c.stmts, ops),
                SlcItem::Loop(l) => walk_items(&l.items, ops),
                _ => {}
            }
        }
    }
    let mut ops = 0u32;
    walk_items(&slc.items, &mut ops);
    Ok((ops, lookups))
}

/// Classification dump entry map, for CLI output.
pub fn classification_map(class: &Classification) -> BTreeMap<String, String> {
    class
        .loops
        .iter()
        .map(|(p, c)| (p.clone(), c.as_str().to_string()))
        .collect()
}
