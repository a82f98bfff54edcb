//! Sequential big-step interpreter. Execution order is the contract every
//! later pipeline stage must preserve: f32 reductions accumulate strictly in
//! program order, so downstream comparisons can demand bit-exact equality.

use super::{Param, ScfExpr, ScfFunction, ScfStmt};
use crate::mem::{Dim, MemImage, OobError};
use crate::types::{scalar_binop, ArithError, ElemType, Lit, Scalar};
use std::collections::HashMap;

#[derive(Debug, Clone, thiserror::Error)]
pub enum InterpError {
    #[error("memref `{mem}` access out of bounds: {source} (iteration {iteration:?})")]
    Oob {
        mem: String,
        #[source]
        source: OobError,
        iteration: Vec<(String, u64)>,
    },
    #[error("arithmetic fault: {source} (iteration {iteration:?})")]
    Arith {
        #[source]
        source: ArithError,
        iteration: Vec<(String, u64)>,
    },
    #[error("parameter `{0}` is not bound in the memory image")]
    Unbound(String),
    #[error("memref `{mem}`: declared shape {declared} incompatible with bound shape {bound:?}")]
    Shape {
        mem: String,
        declared: String,
        bound: Vec<u64>,
    },
    #[error("value of unexpected type for `{0}`")]
    Type(String),
}

/// Check that every parameter is bound and static dims agree, then run the
/// function and return the final memory image.
pub fn interpret_scf(f: &ScfFunction, inputs: &MemImage) -> Result<MemImage, InterpError> {
    bind_check(f, inputs)?;
    let mut mem = inputs.clone();
    let mut it = Interp {
        f,
        mem: &mut mem,
        locals: vec![HashMap::new()],
        iter_stack: Vec::new(),
    };
    it.block(&f.body)?;
    Ok(mem)
}

pub(crate) fn bind_check(f: &ScfFunction, inputs: &MemImage) -> Result<(), InterpError> {
    for p in &f.params {
        match p {
            Param::Scalar(s) => {
                if inputs.scalar(s).is_none() {
                    return Err(InterpError::Unbound(s.clone()));
                }
            }
            Param::Mem(m) => {
                let buf = inputs
                    .buffer(&m.name)
                    .ok_or_else(|| InterpError::Unbound(m.name.clone()))?;
                let compatible = buf.shape.len() == m.shape.len()
                    && m.shape.iter().zip(&buf.shape).all(|(d, &n)| match d {
                        Dim::Static(s) => *s == n,
                        Dim::Dynamic => true,
                    });
                if !compatible || buf.elem != m.elem {
                    let declared = m
                        .shape
                        .iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join("x");
                    return Err(InterpError::Shape {
                        mem: m.name.clone(),
                        declared: format!("{declared}:{}", m.elem),
                        bound: buf.shape.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

struct Interp<'a> {
    f: &'a ScfFunction,
    mem: &'a mut MemImage,
    locals: Vec<HashMap<String, Scalar>>,
    iter_stack: Vec<(String, u64)>,
}

impl<'a> Interp<'a> {
    fn lookup(&self, name: &str) -> Option<Scalar> {
        for s in self.locals.iter().rev() {
            if let Some(v) = s.get(name) {
                return Some(*v);
            }
        }
        self.mem.scalar(name).map(Scalar::Index)
    }

    fn block(&mut self, stmts: &[ScfStmt]) -> Result<(), InterpError> {
        for s in stmts {
            match s {
                ScfStmt::For {
                    var,
                    lo,
                    hi,
                    step,
                    body,
                    ..
                } => {
                    let lo = self.eval_index(lo)?;
                    let hi = self.eval_index(hi)?;
                    let mut iv = lo;
                    while iv < hi {
                        self.locals.push(HashMap::new());
                        self.locals
                            .last_mut()
                            .unwrap()
                            .insert(var.clone(), Scalar::Index(iv));
                        self.iter_stack.push((var.clone(), iv));
                        self.block(body)?;
                        self.iter_stack.pop();
                        self.locals.pop();
                        iv += step;
                    }
                }
                ScfStmt::Assign { ty, var, value, .. } => {
                    let v = self.eval(value, Some(*ty))?;
                    self.locals.last_mut().unwrap().insert(var.clone(), v);
                }
                ScfStmt::Store {
                    mem, idx, value, ..
                } => {
                    let elem = self
                        .f
                        .elem_of(mem)
                        .ok_or_else(|| InterpError::Unbound(mem.clone()))?;
                    let mut ix = Vec::with_capacity(idx.len());
                    for i in idx {
                        ix.push(self.eval_index(i)?);
                    }
                    let v = self.eval(value, Some(elem))?;
                    let iteration = self.iter_stack.clone();
                    let buf = self
                        .mem
                        .buffers
                        .get_mut(mem)
                        .ok_or_else(|| InterpError::Unbound(mem.clone()))?;
                    buf.set(&ix, v).map_err(|source| InterpError::Oob {
                        mem: mem.clone(),
                        source,
                        iteration,
                    })?;
                }
            }
        }
        Ok(())
    }

    fn eval_index(&mut self, e: &ScfExpr) -> Result<u64, InterpError> {
        match self.eval(e, Some(ElemType::Index))? {
            Scalar::Index(v) => Ok(v),
            _ => Err(InterpError::Type("index expression".into())),
        }
    }

    fn eval(&mut self, e: &ScfExpr, expect: Option<ElemType>) -> Result<Scalar, InterpError> {
        match e {
            ScfExpr::Const(Lit::Int(v)) => match expect {
                Some(ElemType::I32) => Ok(Scalar::I32(*v as i32)),
                Some(ElemType::F32) => Err(InterpError::Type(format!("integer literal {v}"))),
                _ => Ok(Scalar::Index(*v)),
            },
            ScfExpr::Const(Lit::F32(v)) => Ok(Scalar::F32(*v)),
            ScfExpr::Var(v) => self
                .lookup(v)
                .ok_or_else(|| InterpError::Unbound(v.clone())),
            ScfExpr::Load { mem, idx, .. } => {
                let mut ix = Vec::with_capacity(idx.len());
                for i in idx {
                    ix.push(self.eval_index(i)?);
                }
                let buf = self
                    .mem
                    .buffer(mem)
                    .ok_or_else(|| InterpError::Unbound(mem.clone()))?;
                buf.get(&ix).map_err(|source| InterpError::Oob {
                    mem: mem.clone(),
                    source,
                    iteration: self.iter_stack.clone(),
                })
            }
            ScfExpr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, expect)?;
                let b = self.eval(rhs, Some(a.ty()))?;
                scalar_binop(*op, a, b).map_err(|source| InterpError::Arith {
                    source,
                    iteration: self.iter_stack.clone(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_scf, print_scf, verify_scf};
    use super::*;
    use crate::mem::Buffer;

    pub(crate) const SLS_SRC: &str = r#"
void sls(idxs: mref<? x idx>, ptrs: mref<? x idx>, vals: mref<? x ? x f32>,
         out: mref<? x ? x f32>, n_batches: idx, emb_len: idx) {
  for(idx b = 0; b < n_batches; b++) {
    idx beg = ptrs[b];
    idx end = ptrs[b + 1];
    for(idx p = beg; p < end; p++) {
      idx i = idxs[p];
      for(idx e = 0; e < emb_len; e++) {
        f32 val = vals[i, e];
        f32 acc = out[b, e];
        out[b, e] = acc + val;
      }
    }
  }
}
"#;

    pub(crate) fn sls_tiny_inputs() -> MemImage {
        MemImage::new()
            .with_buffer("ptrs", Buffer::from_index(vec![3], vec![0, 2, 3]))
            .with_buffer("idxs", Buffer::from_index(vec![3], vec![1, 0, 2]))
            .with_buffer(
                "vals",
                Buffer::from_f32(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            )
            .with_buffer("out", Buffer::zeros(ElemType::F32, vec![2, 2]))
            .with_scalar("n_batches", 2)
            .with_scalar("emb_len", 2)
    }

    #[test]
    fn sls_structure() {
        let f = parse_scf(SLS_SRC).unwrap();
        verify_scf(&f).unwrap();
        let mut fors = 0;
        let mut stores = 0;
        super::super::walk_stmts(&f.body, &mut |s| match s {
            ScfStmt::For { .. } => fors += 1,
            ScfStmt::Store { .. } => stores += 1,
            _ => {}
        });
        let mut loads = 0;
        super::super::walk_exprs(&f.body, &mut |e| {
            if matches!(e, ScfExpr::Load { .. }) {
                loads += 1;
            }
        });
        assert_eq!(fors, 3);
        assert_eq!(stores, 1);
        // ptrs[b], ptrs[b+1], idxs[p], vals[i,e] plus the accumulator read.
        assert_eq!(loads, 5);
    }

    #[test]
    fn sls_tiny_hand_sum() {
        let f = parse_scf(SLS_SRC).unwrap();
        let out = interpret_scf(&f, &sls_tiny_inputs()).unwrap();
        // Segment 0 sums rows {1, 0}; segment 1 sums row {2}.
        let buf = out.buffer("out").unwrap();
        assert_eq!(buf.get(&[0, 0]).unwrap(), Scalar::F32(4.0));
        assert_eq!(buf.get(&[0, 1]).unwrap(), Scalar::F32(6.0));
        assert_eq!(buf.get(&[1, 0]).unwrap(), Scalar::F32(5.0));
        assert_eq!(buf.get(&[1, 1]).unwrap(), Scalar::F32(6.0));
    }

    #[test]
    fn sls_empty_segments() {
        let f = parse_scf(SLS_SRC).unwrap();
        let mut inputs = sls_tiny_inputs();
        inputs
            .buffers
            .insert("ptrs".into(), Buffer::from_index(vec![3], vec![0, 0, 0]));
        let out = interpret_scf(&f, &inputs).unwrap();
        let buf = out.buffer("out").unwrap();
        for b in 0..2 {
            for e in 0..2 {
                assert_eq!(buf.get(&[b, e]).unwrap(), Scalar::F32(0.0));
            }
        }
    }

    #[test]
    fn identity_program() {
        let f = parse_scf("void f(o: mref<1 x f32>){ o[0] = o[0]; }").unwrap();
        verify_scf(&f).unwrap();
        let mut stores = 0;
        super::super::walk_stmts(&f.body, &mut |s| {
            if matches!(s, ScfStmt::Store { .. }) {
                stores += 1;
            }
        });
        assert_eq!(stores, 1);
        let img = MemImage::new().with_buffer("o", Buffer::from_f32(vec![1], vec![7.5]));
        let out = interpret_scf(&f, &img).unwrap();
        assert!(out.bit_eq(&img));
    }

    #[test]
    fn negative_stride_rejected() {
        let err = parse_scf("void f(n: idx){ for(idx b = 0; b < n; b--) { } }");
        assert!(err.is_err());
        let err = parse_scf("void f(n: idx){ for(idx b = 0; b < n; b += 0) { } }");
        assert!(err.is_err());
    }

    #[test]
    fn print_parse_round_trip() {
        let f = parse_scf(SLS_SRC).unwrap();
        let printed = print_scf(&f);
        let f2 = parse_scf(&printed).unwrap();
        // Struct equality up to locations.
        assert_eq!(print_scf(&f2), printed);
        // += sugar desugars to the split form.
        let g = parse_scf("void f(o: mref<4 x f32>, n: idx){ for(idx i = 0; i < n; i++){ o[i] += 1.5; } }")
            .unwrap();
        let printed = print_scf(&g);
        assert!(printed.contains("o[i] = o[i] + 1.5;"));
    }

    #[test]
    fn verify_rw_sets() {
        let f = parse_scf(SLS_SRC).unwrap();
        let rw = verify_scf(&f).unwrap();
        assert!(rw.read_only.contains("ptrs"));
        assert!(rw.read_only.contains("idxs"));
        assert!(rw.read_only.contains("vals"));
        assert!(rw.written.contains("out"));
        assert!(!rw.read_only.contains("out"));
    }

    #[test]
    fn storing_into_idxs_reclassifies() {
        let src = r#"
void f(idxs: mref<4 x idx>, n: idx) {
  for(idx i = 0; i < n; i++) {
    idx v = idxs[i];
    idxs[i] = v + 1;
  }
}
"#;
        let f = parse_scf(src).unwrap();
        let rw = verify_scf(&f).unwrap();
        assert!(rw.written.contains("idxs"));
        assert!(!rw.read_only.contains("idxs"));
    }

    #[test]
    fn undeclared_scalar_rejected() {
        let f = parse_scf("void f(o: mref<1 x f32>){ o[0] = o[missing]; }").unwrap();
        let err = verify_scf(&f).unwrap_err();
        assert!(err.to_string().contains("undeclared identifier `missing`"));
    }

    #[test]
    fn oob_reports_iteration_state() {
        let f = parse_scf(SLS_SRC).unwrap();
        let mut inputs = sls_tiny_inputs();
        inputs
            .buffers
            .insert("idxs".into(), Buffer::from_index(vec![3], vec![1, 9, 2]));
        let err = interpret_scf(&f, &inputs).unwrap_err();
        match err {
            InterpError::Oob { mem, iteration, .. } => {
                assert_eq!(mem, "vals");
                assert!(iteration.contains(&("p".to_string(), 1)));
            }
            other => panic!("expected Oob, got {other:?}"),
        }
    }

    #[test]
    fn missing_binding_rejected() {
        let f = parse_scf(SLS_SRC).unwrap();
        let mut inputs = sls_tiny_inputs();
        inputs.buffers.remove("vals");
        assert!(matches!(
            interpret_scf(&f, &inputs),
            Err(InterpError::Unbound(m)) if m == "vals"
        ));
    }
}
