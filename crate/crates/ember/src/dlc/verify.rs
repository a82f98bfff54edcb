//! Static checks on decoupled programs: stream def-before-use, push/pop
//! conformance per token (so the VM never misreads queue bytes), and
//! memref disjointness between the two engines.

use super::*;
use crate::cpu::{CpuExpr, CpuStmt, TypeCk};
use crate::diag::{Diag, Diags};
use crate::types::ElemType;
use std::collections::{BTreeSet, HashMap, HashSet};

pub fn verify_dlc(p: &DlcProgram) -> Result<(), Diags> {
    let mut diags = Diags::default();

    // Units: bounds from ancestors only.
    for u in &p.access.units {
        for (what, op) in [("lower", &u.lo), ("upper", &u.ub)] {
            match op {
                DlcOperand::Ite(t) if *t >= u.id => diags.push(Diag::new(
                    u.name.clone(),
                    format!("{what} bound references unit {t}, not an ancestor"),
                )),
                DlcOperand::Stream(s) => match p.access.stream(s) {
                    Some(d) if d.level < u.id => {}
                    Some(_) => diags.push(Diag::new(
                        u.name.clone(),
                        format!("{what} bound stream `{s}` is not from an ancestor level"),
                    )),
                    None => diags.push(Diag::new(
                        u.name.clone(),
                        format!("{what} bound references unknown stream `{s}`"),
                    )),
                },
                DlcOperand::Scalar(v)
                    if !p.is_scalar_param(v) => {
                        diags.push(Diag::new(u.name.clone(), format!("unknown scalar `{v}`")));
                    }
                _ => {}
            }
        }
        if u.stride == 0 {
            diags.push(Diag::new(u.name.clone(), "stride must be at least 1".to_string()));
        }
        if u.id != p.access.units.iter().position(|x| x.name == u.name).unwrap() {
            diags.push(Diag::new(
                u.name.clone(),
                "unit ids must match declaration order".to_string(),
            ));
        }
    }

    // Streams: operands defined before use, levels visible.
    let mut seen: HashMap<&str, &DlcStream> = HashMap::new();
    for s in &p.access.streams {
        if s.level >= p.access.units.len() {
            diags.push(Diag::new(s.name.clone(), format!("owning unit {} does not exist", s.level)));
        }
        let check_op = |op: &DlcOperand, diags: &mut Diags| match op {
            DlcOperand::Stream(name) => match seen.get(name.as_str()) {
                Some(d) if d.level <= s.level => {}
                Some(_) => diags.push(Diag::new(
                    s.name.clone(),
                    format!("operand `{name}` is owned by a deeper level"),
                )),
                None => diags.push(Diag::new(
                    s.name.clone(),
                    format!("operand `{name}` is not defined before use"),
                )),
            },
            DlcOperand::Ite(t) => {
                if *t > s.level {
                    diags.push(Diag::new(
                        s.name.clone(),
                        format!("operand references unit {t} below the owning level"),
                    ));
                }
            }
            DlcOperand::Scalar(v) => {
                if !p.is_scalar_param(v) {
                    diags.push(Diag::new(s.name.clone(), format!("unknown scalar `{v}`")));
                }
            }
            DlcOperand::DimSize(m, d) => match p.memref(m) {
                Some(mr) if *d < mr.rank() => {}
                Some(_) => diags.push(Diag::new(
                    s.name.clone(),
                    format!("dim({m}, {d}) is out of rank"),
                )),
                None => diags.push(Diag::new(s.name.clone(), format!("unknown memref `{m}`"))),
            },
            DlcOperand::Lit(_) => {}
        };
        match &s.kind {
            DlcStreamKind::Mem { mem, index, .. } => {
                if p.memref(mem).is_none() {
                    diags.push(Diag::new(s.name.clone(), format!("unknown memref `{mem}`")));
                }
                if index.is_empty() || index.len() > 2 {
                    diags.push(Diag::new(
                        s.name.clone(),
                        format!("memory streams take one or two index addends, found {}", index.len()),
                    ));
                }
                for op in index {
                    check_op(op, &mut diags);
                }
            }
            DlcStreamKind::Alu { lhs, rhs, .. } => {
                check_op(lhs, &mut diags);
                check_op(rhs, &mut diags);
            }
        }
        seen.insert(&s.name, s);
    }

    // Triggers and arms correspond one to one.
    let triggers = p.access.triggers();
    let mut trig_set: BTreeSet<u8> = BTreeSet::new();
    for t in &triggers {
        if !trig_set.insert(t.byte()) {
            diags.push(Diag::new(
                "access",
                format!("duplicate callback trigger for token {}", t.byte()),
            ));
        }
    }
    let mut arm_set: BTreeSet<u8> = BTreeSet::new();
    for a in &p.execute.arms {
        if !arm_set.insert(a.token.byte()) {
            diags.push(Diag::new(
                "execute",
                format!("duplicate arm for token {}", a.token.byte()),
            ));
        }
    }
    for t in trig_set.difference(&arm_set) {
        diags.push(Diag::new(
            "execute",
            format!("no arm handles triggered token {t}"),
        ));
    }
    for t in arm_set.difference(&trig_set) {
        diags.push(Diag::new(
            "execute",
            format!("arm for token {t} is never triggered"),
        ));
    }

    // Push/pop conformance per token.
    for arm in &p.execute.arms {
        conformance(p, arm, &mut diags);
    }

    // Type checking of arm bodies.
    for arm in &p.execute.arms {
        let mut ck = TypeCk::new(p);
        ck.allow_pop = true;
        for (name, _) in &p.execute.locals {
            ck.vars
                .insert(name.clone(), crate::types::ValType::Scalar(ElemType::Index));
            ck.bumpable.insert(name.clone());
        }
        ck.check_stmts(&arm.body);
        for e in ck.errors {
            diags.push(Diag::new(format!("arm {}", arm.token.byte()), e));
        }
    }

    // Disjointness: the access side never reads what the execute side
    // writes, and store streams never target access-read memrefs.
    let mut access_reads: BTreeSet<String> = BTreeSet::new();
    for s in &p.access.streams {
        if let DlcStreamKind::Mem { mem, .. } = &s.kind {
            access_reads.insert(mem.clone());
        }
    }
    let mut exec_writes: BTreeSet<String> = BTreeSet::new();
    for arm in &p.execute.arms {
        collect_writes(&arm.body, &mut exec_writes);
    }
    for m in access_reads.intersection(&exec_writes) {
        diags.push(Diag::new(
            "program",
            format!("memref `{m}` is read by the access engine and written by the execute engine"),
        ));
    }
    for op in &p.access.marshals {
        if let MarshalOp::Store { mem, .. } = op {
            if access_reads.contains(mem) {
                diags.push(Diag::new(
                    "program",
                    format!("store stream targets access-read memref `{mem}`"),
                ));
            }
        }
    }

    diags.into_result()
}

fn collect_writes(stmts: &[CpuStmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match s {
            CpuStmt::Store { mem, .. } | CpuStmt::VStore { mem, .. } => {
                out.insert(mem.clone());
            }
            CpuStmt::For { body, .. } => collect_writes(body, out),
            _ => {}
        }
    }
}

/// The pop layout of an arm must match the push layout of its token:
/// iteration arms consume the token's iteration pushes; end arms consume
/// begin pushes, then (through one counted pop loop) the per-iteration
/// pushes, or the end pushes when nothing is buffered.
fn conformance(p: &DlcProgram, arm: &Arm, diags: &mut Diags) {
    let path = format!("arm {}", arm.token.byte());
    let tu = arm.token.tu;
    let push_sig = |ev: Event| -> Vec<(ElemType, u32)> {
        p.access
            .pushes_at(tu, ev)
            .iter()
            .map(|m| match m {
                MarshalOp::Push { source, width, .. } => {
                    let ty = match source {
                        PushSource::IteBase(_) => ElemType::Index,
                        PushSource::Stream(s) => stream_elem(p, s),
                    };
                    (ty, *width)
                }
                _ => unreachable!(),
            })
            .collect()
    };

    // Split the arm body into flat pops and at most one pop loop.
    let mut flat: Vec<(ElemType, u32)> = Vec::new();
    let mut loop_pops: Option<(Vec<(ElemType, u32)>, &CpuStmt)> = None;
    for s in &arm.body {
        match s {
            CpuStmt::Pop { ty, width, .. } => {
                if loop_pops.is_some() {
                    diags.push(Diag::new(path.clone(), "pop after the drain loop".to_string()));
                }
                flat.push((*ty, *width));
            }
            CpuStmt::For { body, .. } => {
                let mut inner = Vec::new();
                collect_pops(body, &mut inner);
                if !inner.is_empty() {
                    if loop_pops.is_some() {
                        diags.push(Diag::new(path.clone(), "multiple pop loops".to_string()));
                    }
                    loop_pops = Some((inner, s));
                }
            }
            _ => {}
        }
    }

    match arm.token.event {
        Event::Ite => {
            let want = push_sig(Event::Ite);
            if flat != want {
                diags.push(Diag::new(
                    path,
                    format!("pop layout {flat:?} does not match iteration pushes {want:?}"),
                ));
            } else if loop_pops.is_some() {
                diags.push(Diag::new(path, "iteration arms cannot hold pop loops".to_string()));
            }
        }
        Event::Beg => {
            let want = push_sig(Event::Beg);
            // Begin pushes may instead be consumed by an end arm's prefix.
            let claimed_by_end = p
                .execute
                .arms
                .iter()
                .any(|a| a.token.tu == tu && a.token.event == Event::End);
            let want = if claimed_by_end { Vec::new() } else { want };
            if flat != want {
                diags.push(Diag::new(
                    path,
                    format!("pop layout {flat:?} does not match begin pushes {want:?}"),
                ));
            }
        }
        Event::End => {
            let beg = push_sig(Event::Beg);
            let ite = push_sig(Event::Ite);
            let end = push_sig(Event::End);
            match loop_pops {
                Some((inner, for_stmt)) => {
                    if flat != beg {
                        diags.push(Diag::new(
                            path.clone(),
                            format!("prefix pops {flat:?} do not match begin pushes {beg:?}"),
                        ));
                    }
                    if inner != ite {
                        diags.push(Diag::new(
                            path.clone(),
                            format!("loop pops {inner:?} do not match iteration pushes {ite:?}"),
                        ));
                    }
                    if !end.is_empty() {
                        diags.push(Diag::new(
                            path.clone(),
                            "end pushes combined with buffered chunks are not supported".to_string(),
                        ));
                    }
                    // Trip counts: the drain must replay the unit's
                    // iteration space chunk by chunk.
                    if let CpuStmt::For { lo, hi, step, .. } = for_stmt {
                        let unit = &p.access.units[tu];
                        if !expr_matches_operand(lo, &unit.lo)
                            || !expr_matches_operand(hi, &unit.ub)
                        {
                            diags.push(Diag::new(
                                path.clone(),
                                "drain loop bounds do not match the traversal unit".to_string(),
                            ));
                        }
                        if *step != unit.stride * unit.width as u64 {
                            diags.push(Diag::new(
                                path.clone(),
                                format!(
                                    "drain step {} does not cover stride {} x width {}",
                                    step, unit.stride, unit.width
                                ),
                            ));
                        }
                    }
                }
                None => {
                    let mut want = beg.clone();
                    if !ite.is_empty() {
                        // Iteration pushes exist but nothing drains them:
                        // only valid when an iteration arm consumes them.
                        let has_ite_arm = p
                            .execute
                            .arms
                            .iter()
                            .any(|a| a.token.tu == tu && a.token.event == Event::Ite);
                        if !has_ite_arm {
                            diags.push(Diag::new(
                                path.clone(),
                                "iteration pushes have no consuming arm".to_string(),
                            ));
                        }
                        want = end.clone();
                    } else {
                        want.extend(end.iter().copied());
                    }
                    if flat != want {
                        diags.push(Diag::new(
                            path,
                            format!("pop layout {flat:?} does not match pushes {want:?}"),
                        ));
                    }
                }
            }
        }
    }
}

fn collect_pops(stmts: &[CpuStmt], out: &mut Vec<(ElemType, u32)>) {
    for s in stmts {
        match s {
            CpuStmt::Pop { ty, width, .. } => out.push((*ty, *width)),
            CpuStmt::For { body, .. } => collect_pops(body, out),
            _ => {}
        }
    }
}

fn stream_elem(p: &DlcProgram, name: &str) -> ElemType {
    match p.access.stream(name).map(|s| &s.kind) {
        Some(DlcStreamKind::Mem { mem, .. }) => p.elem_of(mem).unwrap_or(ElemType::F32),
        Some(DlcStreamKind::Alu { .. }) => ElemType::Index,
        None => ElemType::Index,
    }
}

fn expr_matches_operand(e: &CpuExpr, op: &DlcOperand) -> bool {
    match (e, op) {
        (CpuExpr::Lit(crate::types::Lit::Int(a)), DlcOperand::Lit(b)) => a == b,
        (CpuExpr::Var(a), DlcOperand::Scalar(b)) => a == b,
        _ => false,
    }
}

/// Memrefs the access engine reads; the VM uses this for its determinism
/// contract.
pub fn access_read_set(p: &DlcProgram) -> HashSet<String> {
    let mut out = HashSet::new();
    for s in &p.access.streams {
        if let DlcStreamKind::Mem { mem, .. } = &s.kind {
            out.insert(mem.clone());
        }
    }
    out
}
