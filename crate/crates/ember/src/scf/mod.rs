//! The structured imperative front-end language: perfectly nested for-loops
//! over memory buffers, with assignments and stores. Its interpreter is the
//! ground-truth oracle for the whole pipeline.

mod interp;
mod parse;
mod print;
mod verify;

pub use interp::{interpret_scf, InterpError};
pub use parse::parse_scf;
pub use print::print_scf;
pub use verify::{verify_scf, RwSets};

use crate::diag::Loc;
use crate::mem::MemRef;
use crate::types::{BinOp, ElemType, Lit};

#[derive(Debug, Clone, PartialEq)]
pub enum ScfExpr {
    Const(Lit),
    Var(String),
    Load {
        mem: String,
        idx: Vec<ScfExpr>,
        loc: Loc,
    },
    Binary {
        op: BinOp,
        lhs: Box<ScfExpr>,
        rhs: Box<ScfExpr>,
    },
}

impl ScfExpr {
    pub fn var(name: &str) -> ScfExpr {
        ScfExpr::Var(name.to_string())
    }

    pub fn int(v: u64) -> ScfExpr {
        ScfExpr::Const(Lit::Int(v))
    }

    pub fn bin(op: BinOp, lhs: ScfExpr, rhs: ScfExpr) -> ScfExpr {
        ScfExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScfStmt {
    For {
        var: String,
        lo: ScfExpr,
        hi: ScfExpr,
        /// Positive literal stride.
        step: u64,
        body: Vec<ScfStmt>,
        loc: Loc,
    },
    /// `ty var = expr;` — declares a fresh local in the current scope.
    Assign {
        ty: ElemType,
        var: String,
        value: ScfExpr,
        loc: Loc,
    },
    Store {
        mem: String,
        idx: Vec<ScfExpr>,
        value: ScfExpr,
        loc: Loc,
    },
}

/// A function parameter: a memref or a runtime-bound index constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Mem(MemRef),
    Scalar(String),
}

impl Param {
    pub fn name(&self) -> &str {
        match self {
            Param::Mem(m) => &m.name,
            Param::Scalar(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfFunction {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<ScfStmt>,
}

impl ScfFunction {
    pub fn memref(&self, name: &str) -> Option<&MemRef> {
        self.params.iter().find_map(|p| match p {
            Param::Mem(m) if m.name == name => Some(m),
            _ => None,
        })
    }

    pub fn memrefs(&self) -> impl Iterator<Item = &MemRef> {
        self.params.iter().filter_map(|p| match p {
            Param::Mem(m) => Some(m),
            _ => None,
        })
    }

    pub fn is_scalar_param(&self, name: &str) -> bool {
        self.params
            .iter()
            .any(|p| matches!(p, Param::Scalar(s) if s == name))
    }

    pub fn elem_of(&self, mem: &str) -> Option<ElemType> {
        self.memref(mem).map(|m| m.elem)
    }
}

/// Walk every statement in the function, depth first.
pub fn walk_stmts<'a>(stmts: &'a [ScfStmt], f: &mut dyn FnMut(&'a ScfStmt)) {
    for s in stmts {
        f(s);
        if let ScfStmt::For { body, .. } = s {
            walk_stmts(body, f);
        }
    }
}

/// Walk every expression in a statement list, depth first.
pub fn walk_exprs<'a>(stmts: &'a [ScfStmt], f: &mut dyn FnMut(&'a ScfExpr)) {
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
    walk_stmts(stmts, &mut |s| match s {
        ScfStmt::For { lo, hi, .. } => {
            expr(lo, f);
            expr(hi, f);
        }
        ScfStmt::Assign { value, .. } => expr(value, f),
        ScfStmt::Store { idx, value, .. } => {
            for i in idx {
                expr(i, f);
            }
            expr(value, f);
        }
    });
}
