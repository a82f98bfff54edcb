//! Static checks: types, declaration-before-use, induction-variable
//! immutability, and read-only/written classification of memrefs.

use super::{ScfExpr, ScfFunction, ScfStmt};
use crate::diag::{Diag, Diags};
use crate::types::{BinOp, ElemType, Lit};
use std::collections::{BTreeSet, HashMap};

/// Which memrefs a function reads and writes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RwSets {
    pub read_only: BTreeSet<String>,
    pub written: BTreeSet<String>,
}

pub fn verify_scf(f: &ScfFunction) -> Result<RwSets, Diags> {
    let mut diags = Diags::default();
    let mut seen = BTreeSet::new();
    for p in &f.params {
        if !seen.insert(p.name().to_string()) {
            diags.push(Diag::new(
                f.name.clone(),
                format!("duplicate parameter name `{}`", p.name()),
            ));
        }
    }
    let mut cx = Cx {
        f,
        diags: &mut diags,
        scopes: vec![HashMap::new()],
        induction: Vec::new(),
    };
    cx.block(&f.body, &format!("fn {}", f.name));
    drop(cx);

    let mut rw = RwSets::default();
    super::walk_stmts(&f.body, &mut |s| {
        if let ScfStmt::Store { mem, .. } = s {
            rw.written.insert(mem.clone());
        }
    });
    super::walk_exprs(&f.body, &mut |e| {
        if let ScfExpr::Load { mem, .. } = e {
            if !rw.written.contains(mem) {
                rw.read_only.insert(mem.clone());
            }
        }
    });
    rw.read_only = rw.read_only.difference(&rw.written).cloned().collect();
    diags.into_result().map(|_| rw)
}

struct Cx<'a> {
    f: &'a ScfFunction,
    diags: &'a mut Diags,
    /// Lexical scopes holding local variable types.
    scopes: Vec<HashMap<String, ElemType>>,
    induction: Vec<String>,
}

impl<'a> Cx<'a> {
    fn lookup(&self, name: &str) -> Option<ElemType> {
        for s in self.scopes.iter().rev() {
            if let Some(t) = s.get(name) {
                return Some(*t);
            }
        }
        if self.f.is_scalar_param(name) {
            return Some(ElemType::Index);
        }
        None
    }

    fn visible(&self, name: &str) -> bool {
        self.lookup(name).is_some() || self.f.params.iter().any(|p| p.name() == name)
    }

    fn block(&mut self, stmts: &[ScfStmt], path: &str) {
        for s in stmts {
            match s {
                ScfStmt::For {
                    var,
                    lo,
                    hi,
                    body,
                    loc,
                    ..
                } => {
                    let p = format!("{path}/for {var}");
                    if self.visible(var) {
                        self.diags.push(Diag::at(
                            *loc,
                            p.clone(),
                            format!("induction variable `{var}` shadows an existing name"),
                        ));
                    }
                    self.expect(lo, ElemType::Index, &p);
                    self.expect(hi, ElemType::Index, &p);
                    self.scopes.push(HashMap::new());
                    self.scopes
                        .last_mut()
                        .unwrap()
                        .insert(var.clone(), ElemType::Index);
                    self.induction.push(var.clone());
                    self.block(body, &p);
                    self.induction.pop();
                    self.scopes.pop();
                }
                ScfStmt::Assign { ty, var, value, loc } => {
                    let p = format!("{path}/{var}");
                    if self.induction.iter().any(|v| v == var) {
                        self.diags.push(Diag::at(
                            *loc,
                            p.clone(),
                            format!("induction variable `{var}` is immutable within its loop"),
                        ));
                    } else if self.visible(var) {
                        self.diags.push(Diag::at(
                            *loc,
                            p.clone(),
                            format!("redefinition of `{var}`"),
                        ));
                    }
                    self.expect(value, *ty, &p);
                    self.scopes.last_mut().unwrap().insert(var.clone(), *ty);
                }
                ScfStmt::Store {
                    mem,
                    idx,
                    value,
                    loc,
                } => {
                    let p = format!("{path}/store {mem}");
                    match self.f.memref(mem) {
                        None => self.diags.push(Diag::at(
                            *loc,
                            p.clone(),
                            format!("store into undeclared memref `{mem}`"),
                        )),
                        Some(m) => {
                            if idx.len() != m.rank() {
                                self.diags.push(Diag::at(
                                    *loc,
                                    p.clone(),
                                    format!(
                                        "memref `{mem}` has rank {}, store uses {} indices",
                                        m.rank(),
                                        idx.len()
                                    ),
                                ));
                            }
                            let elem = m.elem;
                            self.expect(value, elem, &p);
                        }
                    }
                    for i in idx {
                        self.expect(i, ElemType::Index, &p);
                    }
                }
            }
        }
    }

    /// Infer the type of an expression; `None` means a polymorphic integer
    /// literal that adopts its context type.
    fn infer(&mut self, e: &ScfExpr, path: &str) -> Option<ElemType> {
        match e {
            ScfExpr::Const(Lit::Int(_)) => None,
            ScfExpr::Const(Lit::F32(_)) => Some(ElemType::F32),
            ScfExpr::Var(v) => match self.lookup(v) {
                Some(t) => Some(t),
                None => {
                    self.diags.push(Diag::new(
                        path.to_string(),
                        format!("use of undeclared identifier `{v}`"),
                    ));
                    Some(ElemType::Index)
                }
            },
            ScfExpr::Load { mem, idx, loc } => {
                for i in idx {
                    self.expect(i, ElemType::Index, path);
                }
                match self.f.memref(mem) {
                    Some(m) => {
                        if idx.len() != m.rank() {
                            self.diags.push(Diag::at(
                                *loc,
                                path.to_string(),
                                format!(
                                    "memref `{mem}` has rank {}, load uses {} indices",
                                    m.rank(),
                                    idx.len()
                                ),
                            ));
                        }
                        Some(m.elem)
                    }
                    None => {
                        self.diags.push(Diag::at(
                            *loc,
                            path.to_string(),
                            format!("load from undeclared memref `{mem}`"),
                        ));
                        Some(ElemType::F32)
                    }
                }
            }
            ScfExpr::Binary { op, lhs, rhs } => {
                let lt = self.infer(lhs, path);
                let rt = self.infer(rhs, path);
                let ty = match (lt, rt) {
                    (Some(a), Some(b)) if a != b => {
                        self.diags.push(Diag::new(
                            path.to_string(),
                            format!("operand types differ: {a} {op} {b}"),
                        ));
                        Some(a)
                    }
                    (Some(a), _) | (_, Some(a)) => Some(a),
                    (None, None) => None,
                };
                if matches!(op, BinOp::Div | BinOp::Rem) {
                    if let Some(t) = ty {
                        if !t.is_integer() {
                            self.diags.push(Diag::new(
                                path.to_string(),
                                format!("`{op}` requires integer operands, found {t}"),
                            ));
                        }
                    }
                }
                ty
            }
        }
    }

    fn expect(&mut self, e: &ScfExpr, want: ElemType, path: &str) {
        if let Some(got) = self.infer(e, path) {
            if got != want {
                self.diags.push(Diag::new(
                    path.to_string(),
                    format!("type mismatch: expected {want}, found {got}"),
                ));
            }
        } else if want == ElemType::F32 {
            self.diags.push(Diag::new(
                path.to_string(),
                "type mismatch: integer literal used where f32 is expected".to_string(),
            ));
        }
    }
}
