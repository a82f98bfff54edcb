//! Pretty-printer; `parse_scf(print_scf(f))` reparses to a structurally
//! equal function.

use super::{Param, ScfExpr, ScfFunction, ScfStmt};
use crate::types::BinOp;
use std::fmt::Write;

pub fn print_scf(f: &ScfFunction) -> String {
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
                write!(out, "{}>", m.elem).unwrap();
            }
            Param::Scalar(s) => write!(out, "{s}: idx").unwrap(),
        }
    }
    out.push_str(") {\n");
    print_block(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, stmts: &[ScfStmt], level: usize) {
    for s in stmts {
        indent(out, level);
        match s {
            ScfStmt::For {
                var,
                lo,
                hi,
                step,
                body,
                ..
            } => {
                writeln!(
                    out,
                    "for(idx {var} = {}; {var} < {}; {var} += {step}) {{",
                    expr_str(lo),
                    expr_str(hi)
                )
                .unwrap();
                print_block(out, body, level + 1);
                indent(out, level);
                out.push_str("}\n");
            }
            ScfStmt::Assign { ty, var, value, .. } => {
                writeln!(out, "{ty} {var} = {};", expr_str(value)).unwrap();
            }
            ScfStmt::Store {
                mem, idx, value, ..
            } => {
                let idxs: Vec<String> = idx.iter().map(expr_str).collect();
                writeln!(out, "{mem}[{}] = {};", idxs.join(", "), expr_str(value)).unwrap();
            }
        }
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => 1,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 2,
    }
}

pub(super) fn expr_str(e: &ScfExpr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &ScfExpr, min: u8) -> String {
    match e {
        ScfExpr::Const(l) => l.to_string(),
        ScfExpr::Var(v) => v.clone(),
        ScfExpr::Load { mem, idx, .. } => {
            let idxs: Vec<String> = idx.iter().map(expr_str).collect();
            format!("{mem}[{}]", idxs.join(", "))
        }
        ScfExpr::Binary { op, lhs, rhs } => {
            let p = prec(*op);
            // Left-associative grammar: the right child needs parens at
            // equal precedence.
            let s = format!(
                "{} {op} {}",
                expr_prec(lhs, p),
                expr_prec(rhs, p + 1)
            );
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
