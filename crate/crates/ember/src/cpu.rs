//! Imperative compute statements shared by SLC callbacks and DLC execute
//! arms: scalar and masked-vector assignments, loads/stores, drain loops,
//! counter bumps, and queue pops. One evaluator serves both the mid-level
//! interpreter and the VM's execute engine, so their arithmetic is
//! bit-identical by construction.

use crate::lex::{Cursor, ParseError, Tok};
use crate::mem::MemImage;
use crate::types::{scalar_binop, BinOp, ElemType, Lit, Mask, Scalar, ValType, Value, VecVal};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum CpuExpr {
    Lit(Lit),
    Var(String),
    /// Scalar load `m[i, j]`.
    Load { mem: String, idx: Vec<CpuExpr> },
    /// Scalar-scalar, lane-wise vector, or vector-scalar broadcast.
    Bin {
        op: BinOp,
        lhs: Box<CpuExpr>,
        rhs: Box<CpuExpr>,
    },
    /// Contiguous masked vector load starting at `m[idx..]`; the last index
    /// is the lane-0 element position along the fastest-varying dimension.
    VLoad {
        mem: String,
        idx: Vec<CpuExpr>,
        vlen: u32,
        mask: Option<String>,
    },
    /// Lane extract `v[k]` with a literal lane.
    Lane { var: String, lane: u32 },
    /// Buffered chunk read `bufv[pos]`; chunk index is `pos / vlen`.
    Chunk {
        var: String,
        pos: Box<CpuExpr>,
        vlen: u32,
    },
    /// In-lane-order masked reduction: fold live lanes of `v` onto `init`.
    ReduceAdd {
        init: Box<CpuExpr>,
        v: Box<CpuExpr>,
        mask: Option<String>,
    },
    /// Remainder mask: lane i live iff offset + i < bound.
    MaskRemainder {
        vlen: u32,
        offset: Box<CpuExpr>,
        bound: Box<CpuExpr>,
    },
}

impl CpuExpr {
    pub fn var(name: &str) -> CpuExpr {
        CpuExpr::Var(name.to_string())
    }

    pub fn int(v: u64) -> CpuExpr {
        CpuExpr::Lit(Lit::Int(v))
    }

    pub fn bin(op: BinOp, lhs: CpuExpr, rhs: CpuExpr) -> CpuExpr {
        CpuExpr::Bin {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CpuStmt {
    Assign {
        ty: ValType,
        var: String,
        value: CpuExpr,
    },
    Store {
        mem: String,
        idx: Vec<CpuExpr>,
        value: CpuExpr,
    },
    /// Contiguous masked vector store.
    VStore {
        mem: String,
        idx: Vec<CpuExpr>,
        value: CpuExpr,
        vlen: u32,
        mask: Option<String>,
    },
    /// Scalar counted loop (workspace loops and buffer drains).
    For {
        var: String,
        lo: CpuExpr,
        hi: CpuExpr,
        step: u64,
        body: Vec<CpuStmt>,
    },
    /// `var += delta` on a persistent counter (queue alignment).
    Bump { var: String, delta: u64 },
    /// `var = dataQ.pop<width x ty>()` — DLC execute arms only.
    Pop {
        ty: ElemType,
        width: u32,
        var: String,
    },
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum CpuError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("memref `{mem}`: {source}")]
    Oob {
        mem: String,
        #[source]
        source: crate::mem::OobError,
    },
    #[error("{0}")]
    Arith(#[from] crate::types::ArithError),
    #[error("type error: {0}")]
    Type(String),
    #[error("buffer read out of range: chunk {chunk} of {available}")]
    EmptyBuffer { chunk: usize, available: usize },
}

/// Side-channel for memory-request accounting; the VM counts, interpreters
/// don't.
pub trait CpuHooks {
    fn on_exec_mem_request(&mut self) {}
}

pub struct NoHooks;
impl CpuHooks for NoHooks {}

pub type Env = HashMap<String, Value>;

fn get_scalar(v: &Value, what: &str) -> Result<Scalar, CpuError> {
    v.as_scalar()
        .ok_or_else(|| CpuError::Type(format!("{what}: expected scalar value")))
}

fn get_index(v: &Value, what: &str) -> Result<u64, CpuError> {
    v.as_index()
        .ok_or_else(|| CpuError::Type(format!("{what}: expected index value")))
}

fn lookup(env: &Env, mem: &MemImage, name: &str) -> Result<Value, CpuError> {
    if let Some(v) = env.get(name) {
        return Ok(v.clone());
    }
    if let Some(v) = mem.scalar(name) {
        return Ok(Value::Scalar(Scalar::Index(v)));
    }
    Err(CpuError::Unbound(name.to_string()))
}

fn mask_of(env: &Env, mask: &Option<String>, vlen: u32) -> Result<Mask, CpuError> {
    match mask {
        None => Ok(Mask::all(vlen as usize)),
        Some(name) => match env.get(name) {
            Some(Value::Mask(m)) => Ok(m.clone()),
            Some(_) => Err(CpuError::Type(format!("`{name}` is not a mask"))),
            None => Err(CpuError::Unbound(name.clone())),
        },
    }
}

/// Lane-wise binary op with scalar broadcast. Dead-lane integer division by
/// zero yields 0 instead of faulting; masked stores and reductions never
/// observe those lanes.
fn vec_binop(op: BinOp, a: &Value, b: &Value) -> Result<Value, CpuError> {
    let lane_op = |op: BinOp, x: Scalar, y: Scalar| -> Result<Scalar, CpuError> {
        match scalar_binop(op, x, y) {
            Ok(v) => Ok(v),
            Err(crate::types::ArithError::DivByZero) => Ok(Scalar::zero(x.ty())),
            Err(e) => Err(e.into()),
        }
    };
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => Ok(Value::Scalar(scalar_binop(op, *x, *y)?)),
        (Value::Vec(x), Value::Vec(y)) => {
            if x.width() != y.width() {
                return Err(CpuError::Type(format!(
                    "vector width mismatch: {} vs {}",
                    x.width(),
                    y.width()
                )));
            }
            let lanes = x
                .lanes
                .iter()
                .zip(&y.lanes)
                .map(|(p, q)| lane_op(op, *p, *q))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::Vec(VecVal { ty: x.ty, lanes }))
        }
        (Value::Vec(x), Value::Scalar(s)) => {
            let lanes = x
                .lanes
                .iter()
                .map(|p| lane_op(op, *p, *s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::Vec(VecVal { ty: x.ty, lanes }))
        }
        (Value::Scalar(s), Value::Vec(y)) => {
            let lanes = y
                .lanes
                .iter()
                .map(|q| lane_op(op, *s, *q))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Value::Vec(VecVal { ty: y.ty, lanes }))
        }
        _ => Err(CpuError::Type("binary op on non-arithmetic values".into())),
    }
}

pub fn eval_expr(
    e: &CpuExpr,
    env: &Env,
    mem: &MemImage,
    hooks: &mut dyn CpuHooks,
) -> Result<Value, CpuError> {
    match e {
        CpuExpr::Lit(Lit::Int(v)) => Ok(Value::Scalar(Scalar::Index(*v))),
        CpuExpr::Lit(Lit::F32(v)) => Ok(Value::Scalar(Scalar::F32(*v))),
        CpuExpr::Var(name) => lookup(env, mem, name),
        CpuExpr::Load { mem: m, idx } => {
            let mut ix = Vec::with_capacity(idx.len());
            for i in idx {
                ix.push(get_index(&eval_expr(i, env, mem, hooks)?, "load index")?);
            }
            let buf = mem
                .buffer(m)
                .ok_or_else(|| CpuError::Unbound(m.clone()))?;
            hooks.on_exec_mem_request();
            let v = buf.get(&ix).map_err(|source| CpuError::Oob {
                mem: m.clone(),
                source,
            })?;
            Ok(Value::Scalar(v))
        }
        CpuExpr::Bin { op, lhs, rhs } => {
            let a = eval_expr(lhs, env, mem, hooks)?;
            let b = eval_expr(rhs, env, mem, hooks)?;
            // Integer literals adapt to their sibling's element type.
            let (a, b) = coerce_pair(a, b, lhs, rhs);
            vec_binop(*op, &a, &b)
        }
        CpuExpr::VLoad {
            mem: m,
            idx,
            vlen,
            mask,
        } => {
            let msk = mask_of(env, mask, *vlen)?;
            let mut ix = Vec::with_capacity(idx.len());
            for i in idx {
                ix.push(get_index(&eval_expr(i, env, mem, hooks)?, "vload index")?);
            }
            let buf = mem
                .buffer(m)
                .ok_or_else(|| CpuError::Unbound(m.clone()))?;
            hooks.on_exec_mem_request();
            let last = ix.len() - 1;
            let mut lanes = Vec::with_capacity(*vlen as usize);
            for j in 0..*vlen as usize {
                if msk.live.get(j).copied().unwrap_or(false) {
                    let mut lane_ix = ix.clone();
                    lane_ix[last] += j as u64;
                    let v = buf.get(&lane_ix).map_err(|source| CpuError::Oob {
                        mem: m.clone(),
                        source,
                    })?;
                    lanes.push(v);
                } else {
                    lanes.push(Scalar::zero(buf.elem));
                }
            }
            Ok(Value::Vec(VecVal {
                ty: buf.elem,
                lanes,
            }))
        }
        CpuExpr::Lane { var, lane } => match lookup(env, mem, var)? {
            Value::Vec(v) => v
                .lanes
                .get(*lane as usize)
                .copied()
                .map(Value::Scalar)
                .ok_or_else(|| CpuError::Type(format!("lane {lane} out of width {}", v.width()))),
            _ => Err(CpuError::Type(format!("`{var}` is not a vector"))),
        },
        CpuExpr::Chunk { var, pos, vlen } => {
            let p = get_index(&eval_expr(pos, env, mem, hooks)?, "chunk position")?;
            match lookup(env, mem, var)? {
                Value::Chunks(chunks) => {
                    let k = (p / *vlen as u64) as usize;
                    chunks
                        .get(k)
                        .cloned()
                        .map(Value::Vec)
                        .ok_or(CpuError::EmptyBuffer {
                            chunk: k,
                            available: chunks.len(),
                        })
                }
                _ => Err(CpuError::Type(format!("`{var}` is not a buffer value"))),
            }
        }
        CpuExpr::ReduceAdd { init, v, mask } => {
            let mut acc = get_scalar(&eval_expr(init, env, mem, hooks)?, "reduction init")?;
            let vec = match eval_expr(v, env, mem, hooks)? {
                Value::Vec(v) => v,
                _ => return Err(CpuError::Type("vreduce_add needs a vector".into())),
            };
            let msk = mask_of(env, mask, vec.width() as u32)?;
            for (j, lane) in vec.lanes.iter().enumerate() {
                if msk.live.get(j).copied().unwrap_or(false) {
                    acc = scalar_binop(BinOp::Add, acc, *lane)?;
                }
            }
            Ok(Value::Scalar(acc))
        }
        CpuExpr::MaskRemainder {
            vlen,
            offset,
            bound,
        } => {
            let off = get_index(&eval_expr(offset, env, mem, hooks)?, "mask offset")?;
            let b = get_index(&eval_expr(bound, env, mem, hooks)?, "mask bound")?;
            Ok(Value::Mask(Mask::remainder(off, b, *vlen as usize)))
        }
    }
}

/// Integer literals evaluate as Index by default; adapt them when the other
/// operand is i32 or f32-typed literal context is impossible (checked
/// statically). This only rewrites literal-valued scalars.
fn coerce_pair(a: Value, b: Value, le: &CpuExpr, re: &CpuExpr) -> (Value, Value) {
    fn lit_int(e: &CpuExpr) -> Option<u64> {
        match e {
            CpuExpr::Lit(Lit::Int(v)) => Some(*v),
            _ => None,
        }
    }
    fn elem_of(v: &Value) -> Option<ElemType> {
        match v {
            Value::Scalar(s) => Some(s.ty()),
            Value::Vec(v) => Some(v.ty),
            _ => None,
        }
    }
    if let (Some(litv), Some(ElemType::I32)) = (lit_int(le), elem_of(&b)) {
        return (Value::Scalar(Scalar::I32(litv as i32)), b);
    }
    if let (Some(litv), Some(ElemType::I32)) = (lit_int(re), elem_of(&a)) {
        return (a, Value::Scalar(Scalar::I32(litv as i32)));
    }
    (a, b)
}

/// Execute one non-control-flow statement. `For` and `Pop` are driven by the
/// caller (recursively in the interpreter, frame-by-frame in the VM).
pub fn exec_simple_stmt(
    s: &CpuStmt,
    env: &mut Env,
    mem: &mut MemImage,
    hooks: &mut dyn CpuHooks,
) -> Result<(), CpuError> {
    match s {
        CpuStmt::Assign { var, value, .. } => {
            let v = eval_expr(value, env, mem, hooks)?;
            env.insert(var.clone(), v);
            Ok(())
        }
        CpuStmt::Store { mem: m, idx, value } => {
            let mut ix = Vec::with_capacity(idx.len());
            for i in idx {
                ix.push(get_index(&eval_expr(i, env, mem, hooks)?, "store index")?);
            }
            let v = eval_expr(value, env, mem, hooks)?;
            let elem = mem
                .buffer(m)
                .ok_or_else(|| CpuError::Unbound(m.clone()))?
                .elem;
            let v = coerce_store(v, elem)?;
            hooks.on_exec_mem_request();
            let buf = mem.buffers.get_mut(m).unwrap();
            buf.set(&ix, v).map_err(|source| CpuError::Oob {
                mem: m.clone(),
                source,
            })
        }
        CpuStmt::VStore {
            mem: m,
            idx,
            value,
            vlen,
            mask,
        } => {
            let msk = mask_of(env, mask, *vlen)?;
            let mut ix = Vec::with_capacity(idx.len());
            for i in idx {
                ix.push(get_index(&eval_expr(i, env, mem, hooks)?, "vstore index")?);
            }
            let v = match eval_expr(value, env, mem, hooks)? {
                Value::Vec(v) => v,
                Value::Scalar(s) => VecVal {
                    ty: s.ty(),
                    lanes: vec![s; *vlen as usize],
                },
                _ => return Err(CpuError::Type("vstore needs a vector value".into())),
            };
            if v.width() != *vlen as usize {
                return Err(CpuError::Type(format!(
                    "vstore width {} does not match value width {}",
                    vlen,
                    v.width()
                )));
            }
            hooks.on_exec_mem_request();
            let buf = mem
                .buffers
                .get_mut(m)
                .ok_or_else(|| CpuError::Unbound(m.clone()))?;
            let last = ix.len() - 1;
            for j in 0..*vlen as usize {
                if msk.live.get(j).copied().unwrap_or(false) {
                    let mut lane_ix = ix.clone();
                    lane_ix[last] += j as u64;
                    buf.set(&lane_ix, v.lanes[j]).map_err(|source| CpuError::Oob {
                        mem: m.clone(),
                        source,
                    })?;
                }
            }
            Ok(())
        }
        CpuStmt::Bump { var, delta } => {
            let cur = match env.get(var) {
                Some(Value::Scalar(Scalar::Index(v))) => *v,
                _ => return Err(CpuError::Unbound(var.clone())),
            };
            env.insert(var.clone(), Value::Scalar(Scalar::Index(cur + delta)));
            Ok(())
        }
        CpuStmt::For { .. } | CpuStmt::Pop { .. } => {
            Err(CpuError::Type("control statement passed to exec_simple_stmt".into()))
        }
    }
}

fn coerce_store(v: Value, elem: ElemType) -> Result<Scalar, CpuError> {
    match (v, elem) {
        (Value::Scalar(Scalar::Index(x)), ElemType::I32) => Ok(Scalar::I32(x as i32)),
        (Value::Scalar(s), _) => Ok(s),
        _ => Err(CpuError::Type("stored value must be scalar".into())),
    }
}

/// Recursive statement runner for non-VM contexts (callback bodies).
pub fn run_stmts(
    stmts: &[CpuStmt],
    env: &mut Env,
    mem: &mut MemImage,
    hooks: &mut dyn CpuHooks,
) -> Result<(), CpuError> {
    for s in stmts {
        match s {
            CpuStmt::For {
                var,
                lo,
                hi,
                step,
                body,
            } => {
                let lo = get_index(&eval_expr(lo, env, mem, hooks)?, "loop lower bound")?;
                let hi = get_index(&eval_expr(hi, env, mem, hooks)?, "loop upper bound")?;
                let mut iv = lo;
                while iv < hi {
                    env.insert(var.clone(), Value::Scalar(Scalar::Index(iv)));
                    run_stmts(body, env, mem, hooks)?;
                    iv += step;
                }
                env.remove(var);
            }
            CpuStmt::Pop { .. } => {
                return Err(CpuError::Type(
                    "pop statement outside an execute arm".into(),
                ))
            }
            other => exec_simple_stmt(other, env, mem, hooks)?,
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => 1,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 2,
    }
}

pub fn expr_str(e: &CpuExpr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &CpuExpr, min: u8) -> String {
    match e {
        CpuExpr::Lit(l) => l.to_string(),
        CpuExpr::Var(v) => v.clone(),
        CpuExpr::Load { mem, idx } => {
            let ix: Vec<String> = idx.iter().map(expr_str).collect();
            format!("{mem}[{}]", ix.join(", "))
        }
        CpuExpr::Bin { op, lhs, rhs } => {
            let p = prec(*op);
            let s = format!("{} {op} {}", expr_prec(lhs, p), expr_prec(rhs, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
        CpuExpr::VLoad {
            mem,
            idx,
            vlen,
            mask,
        } => {
            let ix: Vec<String> = idx.iter().map(expr_str).collect();
            match mask {
                Some(m) => format!("vload<{vlen}>({mem}[{}], {m})", ix.join(", ")),
                None => format!("vload<{vlen}>({mem}[{}])", ix.join(", ")),
            }
        }
        CpuExpr::Lane { var, lane } => format!("{var}[{lane}]"),
        CpuExpr::Chunk { var, pos, .. } => format!("{var}[{}]", expr_str(pos)),
        CpuExpr::ReduceAdd { init, v, mask } => match mask {
            Some(m) => format!("vreduce_add({}, {}, {m})", expr_str(init), expr_str(v)),
            None => format!("vreduce_add({}, {})", expr_str(init), expr_str(v)),
        },
        CpuExpr::MaskRemainder {
            vlen,
            offset,
            bound,
        } => format!("mask<{vlen}>({}, {})", expr_str(offset), expr_str(bound)),
    }
}

pub fn print_stmts(out: &mut String, stmts: &[CpuStmt], level: usize) {
    for s in stmts {
        for _ in 0..level {
            out.push_str("  ");
        }
        match s {
            CpuStmt::Assign { ty, var, value } => {
                writeln!(out, "{ty} {var} = {};", expr_str(value)).unwrap();
            }
            CpuStmt::Store { mem, idx, value } => {
                let ix: Vec<String> = idx.iter().map(expr_str).collect();
                writeln!(out, "{mem}[{}] = {};", ix.join(", "), expr_str(value)).unwrap();
            }
            CpuStmt::VStore {
                mem,
                idx,
                value,
                vlen,
                mask,
            } => {
                let ix: Vec<String> = idx.iter().map(expr_str).collect();
                match mask {
                    Some(m) => writeln!(
                        out,
                        "vstore<{vlen}>({}, {mem}[{}], {m});",
                        expr_str(value),
                        ix.join(", ")
                    )
                    .unwrap(),
                    None => writeln!(
                        out,
                        "vstore<{vlen}>({}, {mem}[{}]);",
                        expr_str(value),
                        ix.join(", ")
                    )
                    .unwrap(),
                }
            }
            CpuStmt::For {
                var,
                lo,
                hi,
                step,
                body,
            } => {
                writeln!(
                    out,
                    "for(idx {var} = {}; {var} < {}; {var} += {step}) {{",
                    expr_str(lo),
                    expr_str(hi)
                )
                .unwrap();
                print_stmts(out, body, level + 1);
                for _ in 0..level {
                    out.push_str("  ");
                }
                out.push_str("}\n");
            }
            CpuStmt::Bump { var, delta } => {
                writeln!(out, "{var} += {delta};").unwrap();
            }
            CpuStmt::Pop { ty, width, var } => {
                let decl = if *width == 1 {
                    ty.to_string()
                } else {
                    format!("vec<{width} x {ty}>")
                };
                writeln!(out, "{decl} {var} = dataQ.pop<{width} x {ty}>();").unwrap();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Variable typing context threaded through parsing so `v[e]` can resolve to
/// lane extracts and chunk reads.
#[derive(Default, Clone)]
pub struct VarCtx {
    pub vars: HashMap<String, ValType>,
}

impl VarCtx {
    pub fn declare(&mut self, name: &str, ty: ValType) {
        self.vars.insert(name.to_string(), ty);
    }
}

pub fn parse_val_type(c: &mut Cursor) -> Result<ValType, ParseError> {
    match c.peek().clone() {
        Tok::Ident(id) if id == "vec" => {
            c.bump();
            c.expect_punct("<")?;
            let w = c.expect_int()? as u32;
            c.expect_kw("x")?;
            let t = parse_elem(c)?;
            c.expect_punct(">")?;
            Ok(ValType::Vec(t, w))
        }
        Tok::Ident(id) if id == "chunks" => {
            c.bump();
            c.expect_punct("<")?;
            let w = c.expect_int()? as u32;
            c.expect_kw("x")?;
            let t = parse_elem(c)?;
            c.expect_punct(">")?;
            Ok(ValType::Chunks(t, w))
        }
        Tok::Ident(id) if id == "vmask" => {
            c.bump();
            c.expect_punct("<")?;
            let w = c.expect_int()? as u32;
            c.expect_punct(">")?;
            Ok(ValType::Mask(w))
        }
        _ => Ok(ValType::Scalar(parse_elem(c)?)),
    }
}

pub fn parse_elem(c: &mut Cursor) -> Result<ElemType, ParseError> {
    let id = c.expect_ident()?;
    match id.as_str() {
        "idx" | "index" => Ok(ElemType::Index),
        "i32" => Ok(ElemType::I32),
        "f32" => Ok(ElemType::F32),
        other => c.err(format!("unknown element type `{other}`")),
    }
}

fn peek_is_type(c: &Cursor) -> bool {
    matches!(c.peek(), Tok::Ident(s)
        if matches!(s.as_str(), "idx" | "index" | "i32" | "f32" | "vec" | "vmask" | "chunks"))
}

/// Parse a `{ stmt* }` block of CPU statements. `allow_pop` enables the
/// DLC-arm pop form.
pub fn parse_block(
    c: &mut Cursor,
    ctx: &mut VarCtx,
    allow_pop: bool,
) -> Result<Vec<CpuStmt>, ParseError> {
    c.expect_punct("{")?;
    let mut out = Vec::new();
    while !c.eat_punct("}") {
        out.push(parse_stmt(c, ctx, allow_pop)?);
    }
    Ok(out)
}

pub fn parse_stmt(
    c: &mut Cursor,
    ctx: &mut VarCtx,
    allow_pop: bool,
) -> Result<CpuStmt, ParseError> {
    if c.eat_kw("for") {
        c.expect_punct("(")?;
        let t = parse_elem(c)?;
        if t != ElemType::Index {
            return c.err("drain loop variable must be index-typed");
        }
        let var = c.expect_ident()?;
        c.expect_punct("=")?;
        let lo = parse_expr(c, ctx)?;
        c.expect_punct(";")?;
        let v2 = c.expect_ident()?;
        if v2 != var {
            return c.err("loop condition variable mismatch");
        }
        c.expect_punct("<")?;
        let hi = parse_expr(c, ctx)?;
        c.expect_punct(";")?;
        let v3 = c.expect_ident()?;
        if v3 != var {
            return c.err("loop step variable mismatch");
        }
        let step = if c.eat_punct("++") {
            1
        } else {
            c.expect_punct("+=")?;
            c.expect_int()?
        };
        if step == 0 {
            return c.err("loop step must be positive");
        }
        c.expect_punct(")")?;
        ctx.declare(&var, ValType::Scalar(ElemType::Index));
        c.deeper()?;
        let body = parse_block(c, ctx, allow_pop)?;
        c.shallower();
        return Ok(CpuStmt::For {
            var,
            lo,
            hi,
            step,
            body,
        });
    }
    if c.eat_kw("vstore") {
        c.expect_punct("<")?;
        let vlen = c.expect_int()? as u32;
        c.expect_punct(">")?;
        c.expect_punct("(")?;
        let value = parse_expr(c, ctx)?;
        c.expect_punct(",")?;
        let mem = c.expect_ident()?;
        c.expect_punct("[")?;
        let mut idx = vec![parse_expr(c, ctx)?];
        while c.eat_punct(",") {
            idx.push(parse_expr(c, ctx)?);
        }
        c.expect_punct("]")?;
        let mask = if c.eat_punct(",") {
            Some(c.expect_ident()?)
        } else {
            None
        };
        c.expect_punct(")")?;
        c.expect_punct(";")?;
        return Ok(CpuStmt::VStore {
            mem,
            idx,
            value,
            vlen,
            mask,
        });
    }
    if peek_is_type(c) {
        let ty = parse_val_type(c)?;
        let var = c.expect_ident()?;
        c.expect_punct("=")?;
        // Pop form: `dataQ.pop<w x t>()`.
        if matches!(c.peek(), Tok::Ident(s) if s == "dataQ") {
            if !allow_pop {
                return c.err("pop is only valid inside an execute arm");
            }
            c.bump();
            c.expect_punct(".")?;
            c.expect_kw("pop")?;
            c.expect_punct("<")?;
            let width = c.expect_int()? as u32;
            c.expect_kw("x")?;
            let t = parse_elem(c)?;
            c.expect_punct(">")?;
            c.expect_punct("(")?;
            c.expect_punct(")")?;
            c.expect_punct(";")?;
            ctx.declare(
                &var,
                if width == 1 {
                    ValType::Scalar(t)
                } else {
                    ValType::Vec(t, width)
                },
            );
            return Ok(CpuStmt::Pop { ty: t, width, var });
        }
        let value = parse_expr(c, ctx)?;
        c.expect_punct(";")?;
        ctx.declare(&var, ty);
        return Ok(CpuStmt::Assign { ty, var, value });
    }
    // `name += n;`, `name[...] = e;` or `name[...] += e;`
    let name = c.expect_ident()?;
    if c.eat_punct("+=") {
        let delta = c.expect_int()?;
        c.expect_punct(";")?;
        return Ok(CpuStmt::Bump { var: name, delta });
    }
    c.expect_punct("[")?;
    let mut idx = vec![parse_expr(c, ctx)?];
    while c.eat_punct(",") {
        idx.push(parse_expr(c, ctx)?);
    }
    c.expect_punct("]")?;
    let accumulate = if c.eat_punct("+=") {
        true
    } else {
        c.expect_punct("=")?;
        false
    };
    let rhs = parse_expr(c, ctx)?;
    c.expect_punct(";")?;
    let value = if accumulate {
        CpuExpr::bin(
            BinOp::Add,
            CpuExpr::Load {
                mem: name.clone(),
                idx: idx.clone(),
            },
            rhs,
        )
    } else {
        rhs
    };
    Ok(CpuStmt::Store {
        mem: name,
        idx,
        value,
    })
}

pub fn parse_expr(c: &mut Cursor, ctx: &VarCtx) -> Result<CpuExpr, ParseError> {
    let mut lhs = parse_term(c, ctx)?;
    loop {
        let op = if c.eat_punct("+") {
            BinOp::Add
        } else if c.eat_punct("-") {
            BinOp::Sub
        } else {
            return Ok(lhs);
        };
        let rhs = parse_term(c, ctx)?;
        lhs = CpuExpr::bin(op, lhs, rhs);
    }
}

fn parse_term(c: &mut Cursor, ctx: &VarCtx) -> Result<CpuExpr, ParseError> {
    let mut lhs = parse_factor(c, ctx)?;
    loop {
        let op = if c.eat_punct("*") {
            BinOp::Mul
        } else if c.eat_punct("/") {
            BinOp::Div
        } else if c.eat_punct("%") {
            BinOp::Rem
        } else {
            return Ok(lhs);
        };
        let rhs = parse_factor(c, ctx)?;
        lhs = CpuExpr::bin(op, lhs, rhs);
    }
}

fn parse_factor(c: &mut Cursor, ctx: &VarCtx) -> Result<CpuExpr, ParseError> {
    match c.peek().clone() {
        Tok::Int(v) => {
            c.bump();
            Ok(CpuExpr::Lit(Lit::Int(v)))
        }
        Tok::Float(v) => {
            c.bump();
            Ok(CpuExpr::Lit(Lit::F32(v)))
        }
        Tok::Punct("(") => {
            c.bump();
            c.deeper()?;
            let e = parse_expr(c, ctx)?;
            c.shallower();
            c.expect_punct(")")?;
            Ok(e)
        }
        Tok::Ident(id) if id == "vload" => {
            c.bump();
            c.expect_punct("<")?;
            let vlen = c.expect_int()? as u32;
            c.expect_punct(">")?;
            c.expect_punct("(")?;
            let mem = c.expect_ident()?;
            c.expect_punct("[")?;
            let mut idx = vec![parse_expr(c, ctx)?];
            while c.eat_punct(",") {
                idx.push(parse_expr(c, ctx)?);
            }
            c.expect_punct("]")?;
            let mask = if c.eat_punct(",") {
                Some(c.expect_ident()?)
            } else {
                None
            };
            c.expect_punct(")")?;
            Ok(CpuExpr::VLoad {
                mem,
                idx,
                vlen,
                mask,
            })
        }
        Tok::Ident(id) if id == "vreduce_add" => {
            c.bump();
            c.expect_punct("(")?;
            let init = parse_expr(c, ctx)?;
            c.expect_punct(",")?;
            let v = parse_expr(c, ctx)?;
            let mask = if c.eat_punct(",") {
                Some(c.expect_ident()?)
            } else {
                None
            };
            c.expect_punct(")")?;
            Ok(CpuExpr::ReduceAdd {
                init: Box::new(init),
                v: Box::new(v),
                mask,
            })
        }
        Tok::Ident(id) if id == "mask" => {
            c.bump();
            c.expect_punct("<")?;
            let vlen = c.expect_int()? as u32;
            c.expect_punct(">")?;
            c.expect_punct("(")?;
            let offset = parse_expr(c, ctx)?;
            c.expect_punct(",")?;
            let bound = parse_expr(c, ctx)?;
            c.expect_punct(")")?;
            Ok(CpuExpr::MaskRemainder {
                vlen,
                offset: Box::new(offset),
                bound: Box::new(bound),
            })
        }
        Tok::Ident(_) => {
            let name = c.expect_ident()?;
            if c.eat_punct("[") {
                // Resolve against the variable context: lane extract on a
                // vector, chunk read on a buffer, memory load otherwise.
                match ctx.vars.get(&name).copied() {
                    Some(ValType::Vec(_, _)) => {
                        let lane = c.expect_int()? as u32;
                        c.expect_punct("]")?;
                        Ok(CpuExpr::Lane { var: name, lane })
                    }
                    Some(ValType::Chunks(_, w)) => {
                        let pos = parse_expr(c, ctx)?;
                        c.expect_punct("]")?;
                        Ok(CpuExpr::Chunk {
                            var: name,
                            pos: Box::new(pos),
                            vlen: w,
                        })
                    }
                    _ => {
                        let mut idx = vec![parse_expr(c, ctx)?];
                        while c.eat_punct(",") {
                            idx.push(parse_expr(c, ctx)?);
                        }
                        c.expect_punct("]")?;
                        Ok(CpuExpr::Load { mem: name, idx })
                    }
                }
            } else {
                Ok(CpuExpr::Var(name))
            }
        }
        other => c.err(format!("expected expression, found {other}")),
    }
}

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

/// Memref signature view for the statement typechecker.
pub trait MemSig {
    fn mem_info(&self, name: &str) -> Option<(ElemType, usize)>;
    fn is_scalar_param(&self, name: &str) -> bool;
}

/// Statement typechecker shared by the SLC and DLC verifiers. Integer
/// literals are polymorphic between index and i32 and adopt context.
pub struct TypeCk<'a> {
    pub sig: &'a dyn MemSig,
    pub vars: HashMap<String, ValType>,
    /// Names that `Bump` may update (loop-carried / execute-local counters).
    pub bumpable: std::collections::BTreeSet<String>,
    pub allow_pop: bool,
    pub errors: Vec<String>,
}

impl<'a> TypeCk<'a> {
    pub fn new(sig: &'a dyn MemSig) -> TypeCk<'a> {
        TypeCk {
            sig,
            vars: HashMap::new(),
            bumpable: Default::default(),
            allow_pop: false,
            errors: Vec::new(),
        }
    }

    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn lookup(&mut self, name: &str) -> Option<ValType> {
        if let Some(t) = self.vars.get(name) {
            return Some(*t);
        }
        if self.sig.is_scalar_param(name) {
            return Some(ValType::Scalar(ElemType::Index));
        }
        None
    }

    pub fn check_stmts(&mut self, stmts: &[CpuStmt]) {
        for s in stmts {
            self.check_stmt(s);
        }
    }

    fn check_stmt(&mut self, s: &CpuStmt) {
        match s {
            CpuStmt::Assign { ty, var, value } => {
                self.expect(value, *ty);
                self.vars.insert(var.clone(), *ty);
            }
            CpuStmt::Store { mem, idx, value } => match self.sig.mem_info(mem) {
                None => self.err(format!("store into unknown memref `{mem}`")),
                Some((elem, rank)) => {
                    if idx.len() != rank {
                        self.err(format!(
                            "memref `{mem}` has rank {rank}, store uses {} indices",
                            idx.len()
                        ));
                    }
                    for i in idx {
                        self.expect(i, ValType::Scalar(ElemType::Index));
                    }
                    self.expect(value, ValType::Scalar(elem));
                }
            },
            CpuStmt::VStore {
                mem,
                idx,
                value,
                vlen,
                mask,
            } => match self.sig.mem_info(mem) {
                None => self.err(format!("vstore into unknown memref `{mem}`")),
                Some((elem, rank)) => {
                    if idx.len() != rank {
                        self.err(format!(
                            "memref `{mem}` has rank {rank}, vstore uses {} indices",
                            idx.len()
                        ));
                    }
                    for i in idx {
                        self.expect(i, ValType::Scalar(ElemType::Index));
                    }
                    self.expect(value, ValType::Vec(elem, *vlen));
                    self.check_mask(mask, *vlen);
                }
            },
            CpuStmt::For {
                var,
                lo,
                hi,
                step,
                body,
            } => {
                self.expect(lo, ValType::Scalar(ElemType::Index));
                self.expect(hi, ValType::Scalar(ElemType::Index));
                if *step == 0 {
                    self.err("loop step must be positive".into());
                }
                let shadow = self.vars.insert(var.clone(), ValType::Scalar(ElemType::Index));
                self.check_stmts(body);
                match shadow {
                    Some(t) => {
                        self.vars.insert(var.clone(), t);
                    }
                    None => {
                        self.vars.remove(var);
                    }
                }
            }
            CpuStmt::Bump { var, .. } => {
                if !self.bumpable.contains(var) {
                    self.err(format!("`{var}` is not an updatable counter"));
                }
            }
            CpuStmt::Pop { ty, width, var } => {
                if !self.allow_pop {
                    self.err("pop statement outside an execute arm".into());
                }
                let t = if *width == 1 {
                    ValType::Scalar(*ty)
                } else {
                    ValType::Vec(*ty, *width)
                };
                self.vars.insert(var.clone(), t);
            }
        }
    }

    fn check_mask(&mut self, mask: &Option<String>, vlen: u32) {
        if let Some(m) = mask {
            match self.lookup(m) {
                Some(ValType::Mask(w)) if w == vlen => {}
                Some(t) => self.err(format!("`{m}` has type {t}, expected vmask<{vlen}>")),
                None => self.err(format!("unknown mask variable `{m}`")),
            }
        }
    }

    /// Infer the type of an expression. `None` means polymorphic int literal.
    pub fn infer(&mut self, e: &CpuExpr) -> Option<ValType> {
        match e {
            CpuExpr::Lit(Lit::Int(_)) => None,
            CpuExpr::Lit(Lit::F32(_)) => Some(ValType::Scalar(ElemType::F32)),
            CpuExpr::Var(v) => match self.lookup(v) {
                Some(t) => Some(t),
                None => {
                    self.err(format!("use of undeclared variable `{v}`"));
                    Some(ValType::Scalar(ElemType::Index))
                }
            },
            CpuExpr::Load { mem, idx } => {
                for i in idx {
                    self.expect(i, ValType::Scalar(ElemType::Index));
                }
                match self.sig.mem_info(mem) {
                    Some((elem, rank)) => {
                        if idx.len() != rank {
                            self.err(format!(
                                "memref `{mem}` has rank {rank}, load uses {} indices",
                                idx.len()
                            ));
                        }
                        Some(ValType::Scalar(elem))
                    }
                    None => {
                        self.err(format!("load from unknown memref `{mem}`"));
                        Some(ValType::Scalar(ElemType::F32))
                    }
                }
            }
            CpuExpr::Bin { op, lhs, rhs } => {
                let lt = self.infer(lhs);
                let rt = self.infer(rhs);
                let joined = match (lt, rt) {
                    (None, None) => None,
                    (Some(t), None) | (None, Some(t)) => Some(t),
                    (Some(a), Some(b)) => Some(self.join(*op, a, b)),
                };
                if matches!(op, BinOp::Div | BinOp::Rem) {
                    if let Some(ValType::Scalar(t) | ValType::Vec(t, _)) = joined {
                        if !t.is_integer() {
                            self.err(format!("`{op}` requires integer operands, found {t}"));
                        }
                    }
                }
                joined
            }
            CpuExpr::VLoad {
                mem,
                idx,
                vlen,
                mask,
            } => {
                for i in idx {
                    self.expect(i, ValType::Scalar(ElemType::Index));
                }
                self.check_mask(mask, *vlen);
                match self.sig.mem_info(mem) {
                    Some((elem, rank)) => {
                        if idx.len() != rank {
                            self.err(format!(
                                "memref `{mem}` has rank {rank}, vload uses {} indices",
                                idx.len()
                            ));
                        }
                        Some(ValType::Vec(elem, *vlen))
                    }
                    None => {
                        self.err(format!("vload from unknown memref `{mem}`"));
                        Some(ValType::Vec(ElemType::F32, *vlen))
                    }
                }
            }
            CpuExpr::Lane { var, lane } => match self.lookup(var) {
                Some(ValType::Vec(t, w)) => {
                    if *lane >= w {
                        self.err(format!("lane {lane} out of width {w} for `{var}`"));
                    }
                    Some(ValType::Scalar(t))
                }
                Some(t) => {
                    self.err(format!("`{var}` has type {t}, lane extract needs a vector"));
                    Some(ValType::Scalar(ElemType::F32))
                }
                None => {
                    self.err(format!("use of undeclared variable `{var}`"));
                    Some(ValType::Scalar(ElemType::F32))
                }
            },
            CpuExpr::Chunk { var, pos, vlen } => {
                self.expect(pos, ValType::Scalar(ElemType::Index));
                match self.lookup(var) {
                    Some(ValType::Chunks(t, w)) => {
                        if w != *vlen {
                            self.err(format!(
                                "chunk width {vlen} does not match buffer width {w}"
                            ));
                        }
                        Some(ValType::Vec(t, w))
                    }
                    Some(t) => {
                        self.err(format!("`{var}` has type {t}, chunk read needs a buffer"));
                        Some(ValType::Vec(ElemType::F32, *vlen))
                    }
                    None => {
                        self.err(format!("use of undeclared variable `{var}`"));
                        Some(ValType::Vec(ElemType::F32, *vlen))
                    }
                }
            }
            CpuExpr::ReduceAdd { init, v, mask } => {
                let it = self.infer(init);
                let vt = self.infer(v);
                if let Some(ValType::Vec(t, w)) = vt {
                    self.check_mask(mask, w);
                    if let Some(ValType::Scalar(s)) = it {
                        if s != t {
                            self.err(format!(
                                "vreduce_add accumulator is {s} but vector holds {t}"
                            ));
                        }
                    }
                    Some(ValType::Scalar(t))
                } else {
                    self.err("vreduce_add needs a vector operand".into());
                    it
                }
            }
            CpuExpr::MaskRemainder {
                vlen,
                offset,
                bound,
            } => {
                self.expect(offset, ValType::Scalar(ElemType::Index));
                self.expect(bound, ValType::Scalar(ElemType::Index));
                Some(ValType::Mask(*vlen))
            }
        }
    }

    fn join(&mut self, op: BinOp, a: ValType, b: ValType) -> ValType {
        match (a, b) {
            (ValType::Scalar(x), ValType::Scalar(y)) => {
                if x != y {
                    self.err(format!("operand types differ: {x} {op} {y}"));
                }
                ValType::Scalar(x)
            }
            (ValType::Vec(x, w), ValType::Vec(y, v)) => {
                if x != y || w != v {
                    self.err(format!(
                        "vector operands differ: vec<{w} x {x}> {op} vec<{v} x {y}>"
                    ));
                }
                ValType::Vec(x, w)
            }
            (ValType::Vec(x, w), ValType::Scalar(y)) | (ValType::Scalar(y), ValType::Vec(x, w)) => {
                if x != y {
                    self.err(format!("broadcast type mismatch: {x} vs {y}"));
                }
                ValType::Vec(x, w)
            }
            (a, b) => {
                self.err(format!("invalid operand types: {a} {op} {b}"));
                a
            }
        }
    }

    pub fn expect(&mut self, e: &CpuExpr, want: ValType) {
        match self.infer(e) {
            Some(got) if got != want => {
                self.err(format!("type mismatch: expected {want}, found {got}"))
            }
            None => {
                // Polymorphic int literal: any scalar integer context is fine.
                match want {
                    ValType::Scalar(t) if t.is_integer() => {}
                    _ => self.err(format!(
                        "type mismatch: integer literal used where {want} is expected"
                    )),
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mem::Buffer;

    #[test]
    fn masked_vload_vstore_round() {
        let mut mem = MemImage::new()
            .with_buffer("a", Buffer::from_f32(vec![5], vec![1.0, 2.0, 3.0, 4.0, 5.0]))
            .with_buffer("b", Buffer::zeros(ElemType::F32, vec![5]));
        let mut env = Env::new();
        env.insert("m".into(), Value::Mask(Mask::remainder(4, 5, 4)));
        let stmts = vec![
            CpuStmt::Assign {
                ty: ValType::Vec(ElemType::F32, 4),
                var: "v".into(),
                value: CpuExpr::VLoad {
                    mem: "a".into(),
                    idx: vec![CpuExpr::int(4)],
                    vlen: 4,
                    mask: Some("m".into()),
                },
            },
            CpuStmt::VStore {
                mem: "b".into(),
                idx: vec![CpuExpr::int(4)],
                value: CpuExpr::var("v"),
                vlen: 4,
                mask: Some("m".into()),
            },
        ];
        run_stmts(&stmts, &mut env, &mut mem, &mut NoHooks).unwrap();
        let b = mem.buffer("b").unwrap();
        assert_eq!(b.get(&[4]).unwrap(), Scalar::F32(5.0));
        assert_eq!(b.get(&[0]).unwrap(), Scalar::F32(0.0));
    }

    #[test]
    fn reduce_add_is_lane_ordered() {
        let mem = MemImage::new();
        let mut env = Env::new();
        env.insert(
            "v".into(),
            Value::Vec(VecVal {
                ty: ElemType::F32,
                lanes: vec![
                    Scalar::F32(1e8),
                    Scalar::F32(1.0),
                    Scalar::F32(-1e8),
                    Scalar::F32(1.0),
                ],
            }),
        );
        let e = CpuExpr::ReduceAdd {
            init: Box::new(CpuExpr::Lit(Lit::F32(0.0))),
            v: Box::new(CpuExpr::var("v")),
            mask: None,
        };
        let got = eval_expr(&e, &env, &mem, &mut NoHooks).unwrap();
        let want = (((0.0f32 + 1e8) + 1.0) + -1e8) + 1.0;
        assert_eq!(got, Value::Scalar(Scalar::F32(want)));
    }

    #[test]
    fn parse_print_stmt_round_trip() {
        let src = "vec<4 x f32> acc = vload<4>(out[b, e], m);\nvstore<4>(acc + val, out[b, e], m);\ni += 1;\nfor(idx e = 0; e < n; e += 4) { f32 x = buf[e]; }\n";
        let mut c = Cursor::new(&format!("{{ {src} }}")).unwrap();
        let mut ctx = VarCtx::default();
        ctx.declare("val", ValType::Vec(ElemType::F32, 4));
        ctx.declare("buf", ValType::Chunks(ElemType::F32, 4));
        let stmts = parse_block(&mut c, &mut ctx, false).unwrap();
        assert_eq!(stmts.len(), 4);
        let mut printed = String::new();
        print_stmts(&mut printed, &stmts, 0);
        let mut c2 = Cursor::new(&format!("{{ {printed} }}")).unwrap();
        let mut ctx2 = VarCtx::default();
        ctx2.declare("val", ValType::Vec(ElemType::F32, 4));
        ctx2.declare("buf", ValType::Chunks(ElemType::F32, 4));
        let stmts2 = parse_block(&mut c2, &mut ctx2, false).unwrap();
        assert_eq!(stmts, stmts2);
    }
}
