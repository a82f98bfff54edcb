//! Sequential interpreter for SLC/SLCV functions: loops, streams, and
//! callbacks run in program order with the same arithmetic contract as the
//! front-end interpreter. Masked lanes are no-ops.

use super::*;
use crate::cpu::{self, CpuError, Env, NoHooks};
use crate::mem::MemImage;
use crate::scf;
use crate::types::{scalar_binop, ElemType, Mask, Scalar, Value, VecVal};
use std::collections::HashMap;

#[derive(Debug, Clone, Default)]
pub struct SlcStats {
    pub callback_invocations: u64,
    pub store_stream_writes: u64,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SlcInterpError {
    #[error("{0}")]
    Cpu(#[from] CpuError),
    #[error("memref `{mem}` access out of bounds: {source}")]
    Oob {
        mem: String,
        #[source]
        source: crate::mem::OobError,
    },
    #[error("parameter `{0}` is not bound in the memory image")]
    Unbound(String),
    #[error("range endpoint `{0}` did not produce a scalar index")]
    Range(String),
    #[error("{0}")]
    Other(String),
}

pub fn interpret_slc(f: &SlcFunction, inputs: &MemImage) -> Result<MemImage, SlcInterpError> {
    interpret_slc_with_stats(f, inputs).map(|(m, _)| m)
}

pub fn interpret_slc_with_stats(
    f: &SlcFunction,
    inputs: &MemImage,
) -> Result<(MemImage, SlcStats), SlcInterpError> {
    // Reuse the front-end binding checks via a synthetic parameter scan.
    for p in &f.params {
        match p {
            scf::Param::Scalar(s) => {
                if inputs.scalar(s).is_none() {
                    return Err(SlcInterpError::Unbound(s.clone()));
                }
            }
            scf::Param::Mem(m) => {
                if inputs.buffer(&m.name).is_none() {
                    return Err(SlcInterpError::Unbound(m.name.clone()));
                }
            }
        }
    }
    let mut exec = Exec {
        mem: inputs.clone(),
        streams: HashMap::new(),
        buffers: HashMap::new(),
        carried: HashMap::new(),
        stats: SlcStats::default(),
    };
    exec.items(&f.items)?;
    Ok((exec.mem, exec.stats))
}

struct Exec {
    mem: MemImage,
    streams: HashMap<String, Value>,
    buffers: HashMap<String, Vec<VecVal>>,
    carried: HashMap<String, u64>,
    stats: SlcStats,
}

impl Exec {
    fn operand_value(&self, o: &Operand) -> Result<Value, SlcInterpError> {
        match o {
            Operand::Lit(v) => Ok(Value::Scalar(Scalar::Index(*v))),
            Operand::Var(v) => self
                .mem
                .scalar(v)
                .map(|x| Value::Scalar(Scalar::Index(x)))
                .ok_or_else(|| SlcInterpError::Unbound(v.clone())),
            Operand::Stream(s) => self
                .streams
                .get(s)
                .cloned()
                .ok_or_else(|| SlcInterpError::Other(format!("stream `{s}` has no value"))),
        }
    }

    fn range_value(&self, r: &RangeRef) -> Result<u64, SlcInterpError> {
        let v = match r {
            RangeRef::Lit(v) => return Ok(*v),
            RangeRef::Var(v) => self
                .mem
                .scalar(v)
                .ok_or_else(|| SlcInterpError::Unbound(v.clone()))?,
            RangeRef::Stream(s) => self
                .streams
                .get(s)
                .and_then(|v| v.as_index())
                .ok_or_else(|| SlcInterpError::Range(s.clone()))?,
        };
        Ok(v)
    }

    fn items(&mut self, items: &[SlcItem]) -> Result<(), SlcInterpError> {
        for it in items {
            match it {
                SlcItem::Decl(d) => self.decl(d)?,
                SlcItem::Push { buf, src } => {
                    let chunk = match self.streams.get(src) {
                        Some(Value::Vec(v)) => v.clone(),
                        Some(Value::Scalar(s)) => VecVal {
                            ty: s.ty(),
                            lanes: vec![*s],
                        },
                        _ => {
                            return Err(SlcInterpError::Other(format!(
                                "push source `{src}` has no value"
                            )))
                        }
                    };
                    self.buffers
                        .get_mut(buf)
                        .ok_or_else(|| SlcInterpError::Other(format!("no buffer `{buf}`")))?
                        .push(chunk);
                }
                SlcItem::StoreStream {
                    mem,
                    idx,
                    value,
                    width,
                    mask,
                } => self.store_stream(mem, idx, value, *width, mask)?,
                SlcItem::Loop(l) => self.run_loop(l)?,
                SlcItem::Call(c) => self.callback(c)?,
            }
        }
        Ok(())
    }

    fn run_loop(&mut self, l: &SlcLoop) -> Result<(), SlcInterpError> {
        let lo = self.range_value(&l.lo)?;
        let hi = self.range_value(&l.hi)?;
        for cv in &l.carried {
            self.carried.insert(cv.name.clone(), cv.init);
        }
        match l.vlen {
            None => {
                let mut iv = lo;
                while iv < hi {
                    self.streams
                        .insert(l.stream.clone(), Value::Scalar(Scalar::Index(iv)));
                    self.items(&l.items)?;
                    iv += l.step;
                }
            }
            Some(vlen) => {
                let mut base = lo;
                while base < hi {
                    let lanes: Vec<Scalar> = (0..vlen as u64)
                        .map(|j| Scalar::Index(base + j * l.step))
                        .collect();
                    let live: Vec<bool> = (0..vlen as u64)
                        .map(|j| base + j * l.step < hi)
                        .collect();
                    self.streams.insert(
                        l.stream.clone(),
                        Value::Vec(VecVal {
                            ty: ElemType::Index,
                            lanes,
                        }),
                    );
                    if let Some(m) = &l.mask {
                        self.streams.insert(m.clone(), Value::Mask(Mask { live }));
                    }
                    self.items(&l.items)?;
                    base += l.step * vlen as u64;
                }
            }
        }
        Ok(())
    }

    /// Per-lane index of dimension operand `o` for lane `j`.
    fn lane_index(&self, o: &IndexOperand, j: usize) -> Result<u64, SlcInterpError> {
        let base = match self.operand_value(&o.base)? {
            Value::Scalar(s) => s
                .as_index()
                .ok_or_else(|| SlcInterpError::Other("index operand must be integer".into()))?,
            Value::Vec(v) => v
                .lanes
                .get(j)
                .and_then(|s| s.as_index())
                .ok_or_else(|| SlcInterpError::Other("index lane out of range".into()))?,
            _ => return Err(SlcInterpError::Other("invalid index operand".into())),
        };
        Ok(base + o.offset)
    }

    fn decl(&mut self, d: &StreamDecl) -> Result<(), SlcInterpError> {
        match &d.kind {
            StreamKind::Buf { .. } => {
                self.buffers.insert(d.name.clone(), Vec::new());
            }
            StreamKind::Load {
                mem, idx, width, mask, ..
            } => {
                let msk = match mask {
                    Some(m) => match self.streams.get(m) {
                        Some(Value::Mask(mk)) => mk.clone(),
                        _ => return Err(SlcInterpError::Other(format!("no mask `{m}`"))),
                    },
                    None => Mask::all(*width as usize),
                };
                let buf = self
                    .mem
                    .buffer(mem)
                    .ok_or_else(|| SlcInterpError::Unbound(mem.clone()))?;
                if *width == 1 {
                    let mut dims = Vec::with_capacity(idx.len());
                    for o in idx {
                        dims.push(self.lane_index(o, 0)?);
                    }
                    let v = buf.get(&dims).map_err(|source| SlcInterpError::Oob {
                        mem: mem.clone(),
                        source,
                    })?;
                    self.streams.insert(d.name.clone(), Value::Scalar(v));
                } else {
                    let mut lanes = Vec::with_capacity(*width as usize);
                    for j in 0..*width as usize {
                        if msk.live.get(j).copied().unwrap_or(false) {
                            let mut dims = Vec::with_capacity(idx.len());
                            for o in idx {
                                dims.push(self.lane_index(o, j)?);
                            }
                            let v = buf.get(&dims).map_err(|source| SlcInterpError::Oob {
                                mem: mem.clone(),
                                source,
                            })?;
                            lanes.push(v);
                        } else {
                            lanes.push(Scalar::zero(buf.elem));
                        }
                    }
                    self.streams.insert(
                        d.name.clone(),
                        Value::Vec(VecVal {
                            ty: buf.elem,
                            lanes,
                        }),
                    );
                }
            }
            StreamKind::Alu { op, lhs, rhs, width } => {
                let a = self.operand_value(lhs)?;
                let b = self.operand_value(rhs)?;
                let value = if *width == 1 {
                    let x = a
                        .as_scalar()
                        .ok_or_else(|| SlcInterpError::Other("alu operand must be scalar".into()))?;
                    let y = b
                        .as_scalar()
                        .ok_or_else(|| SlcInterpError::Other("alu operand must be scalar".into()))?;
                    Value::Scalar(
                        scalar_binop(*op, x, y).map_err(|e| SlcInterpError::Cpu(e.into()))?,
                    )
                } else {
                    let lane = |v: &Value, j: usize| -> Scalar {
                        match v {
                            Value::Scalar(s) => *s,
                            Value::Vec(vv) => vv.lanes[j],
                            _ => Scalar::Index(0),
                        }
                    };
                    let mut lanes = Vec::with_capacity(*width as usize);
                    for j in 0..*width as usize {
                        let r = match scalar_binop(*op, lane(&a, j), lane(&b, j)) {
                            Ok(v) => v,
                            // Dead lanes may divide by zero; they are never
                            // observed.
                            Err(crate::types::ArithError::DivByZero) => Scalar::Index(0),
                            Err(e) => return Err(SlcInterpError::Cpu(e.into())),
                        };
                        lanes.push(r);
                    }
                    Value::Vec(VecVal {
                        ty: ElemType::Index,
                        lanes,
                    })
                };
                self.streams.insert(d.name.clone(), value);
            }
        }
        Ok(())
    }

    fn store_stream(
        &mut self,
        mem: &str,
        idx: &[IndexOperand],
        value: &str,
        width: u32,
        mask: &Option<String>,
    ) -> Result<(), SlcInterpError> {
        let msk = match mask {
            Some(m) => match self.streams.get(m) {
                Some(Value::Mask(mk)) => mk.clone(),
                _ => return Err(SlcInterpError::Other(format!("no mask `{m}`"))),
            },
            None => Mask::all(width as usize),
        };
        let val = self
            .streams
            .get(value)
            .cloned()
            .ok_or_else(|| SlcInterpError::Other(format!("stream `{value}` has no value")))?;
        for j in 0..width as usize {
            if !msk.live.get(j).copied().unwrap_or(false) {
                continue;
            }
            let mut dims = Vec::with_capacity(idx.len());
            for o in idx {
                dims.push(self.lane_index(o, j)?);
            }
            let v = match &val {
                Value::Scalar(s) => *s,
                Value::Vec(vv) => vv.lanes[j],
                _ => return Err(SlcInterpError::Other("store stream value".into())),
            };
            let buf = self
                .mem
                .buffers
                .get_mut(mem)
                .ok_or_else(|| SlcInterpError::Unbound(mem.to_string()))?;
            buf.set(&dims, v).map_err(|source| SlcInterpError::Oob {
                mem: mem.to_string(),
                source,
            })?;
            self.stats.store_stream_writes += 1;
        }
        Ok(())
    }

    fn callback(&mut self, c: &Callback) -> Result<(), SlcInterpError> {
        let mut env = Env::new();
        for tv in &c.tovals {
            let v = match tv.kind {
                ToValKind::Scalar => self
                    .streams
                    .get(&tv.stream)
                    .cloned()
                    .ok_or_else(|| SlcInterpError::Other(format!("stream `{}` has no value", tv.stream)))?,
                ToValKind::Lane0 => match self.streams.get(&tv.stream) {
                    Some(Value::Vec(v)) => Value::Scalar(v.lanes[0]),
                    _ => {
                        return Err(SlcInterpError::Other(format!(
                            "stream `{}` is not a vector",
                            tv.stream
                        )))
                    }
                },
                ToValKind::Vector => self
                    .streams
                    .get(&tv.stream)
                    .cloned()
                    .ok_or_else(|| SlcInterpError::Other(format!("stream `{}` has no value", tv.stream)))?,
                ToValKind::MaskRead => self
                    .streams
                    .get(&tv.stream)
                    .cloned()
                    .ok_or_else(|| SlcInterpError::Other(format!("mask `{}` has no value", tv.stream)))?,
                ToValKind::Buffer => {
                    let chunks = self
                        .buffers
                        .get_mut(&tv.stream)
                        .ok_or_else(|| SlcInterpError::Other(format!("no buffer `{}`", tv.stream)))?;
                    Value::Chunks(std::mem::take(chunks))
                }
            };
            env.insert(tv.var.clone(), v);
        }
        for (k, v) in &self.carried {
            env.insert(k.clone(), Value::Scalar(Scalar::Index(*v)));
        }
        cpu::run_stmts(&c.stmts, &mut env, &mut self.mem, &mut NoHooks)?;
        for (k, v) in self.carried.iter_mut() {
            if let Some(Value::Scalar(Scalar::Index(nv))) = env.get(k) {
                *v = *nv;
            }
        }
        self.stats.callback_invocations += 1;
        Ok(())
    }
}
