//! The access and execute engines and their cooperative scheduler.
//!
//! The access engine walks the traversal-unit chain depth first, evaluating
//! streams lazily per iteration and marshaling queue items in declaration
//! order; the execute engine pops control tokens and runs the matching arm
//! statement by statement. Either engine suspends mid-work when its queue
//! blocks, so any fair interleaving drains the program.

use super::cache::CacheSim;
use super::queue::{ByteQueue, Slot, SlotQueue};
use super::{Counters, Schedule, VmConfig};
use crate::cpu::{self, CpuHooks, CpuStmt, Env};
use crate::dlc::{
    DlcOperand, DlcProgram, DlcStream, DlcStreamKind, Event, MarshalOp, PushSource, Token,
    DONE_TOKEN,
};
use crate::mem::MemImage;
use crate::types::{ElemType, Scalar, Value, VecVal};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::rc::Rc;

#[derive(Debug, Clone, thiserror::Error)]
pub enum VmError {
    #[error("deadlock: both engines blocked (ctrlQ={ctrl} tokens, dataQ={data} slots): {state}")]
    Deadlock {
        ctrl: usize,
        data: usize,
        state: String,
    },
    #[error("out-of-bounds access on `{mem}`: {detail}")]
    Oob { mem: String, detail: String },
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mem: MemImage,
    pub counters: Counters,
}

/// Run a verified program to completion under the configured schedule.
pub fn run(p: &DlcProgram, inputs: &MemImage, cfg: &VmConfig) -> Result<RunResult, VmError> {
    let mut vm = Vm::new(p, inputs, cfg)?;
    vm.run_to_completion()?;
    Ok(RunResult {
        mem: vm.mem,
        counters: vm.counters,
    })
}

/// Same as `run`, but under a seeded random fair interleaving: the result
/// must be identical for every seed.
pub fn run_interleaved(
    p: &DlcProgram,
    inputs: &MemImage,
    cfg: &VmConfig,
    seed: u64,
) -> Result<RunResult, VmError> {
    let cfg = VmConfig {
        schedule: Schedule::Seeded(seed),
        ..cfg.clone()
    };
    run(p, inputs, &cfg)
}

/// Run under every given seed and fail loudly on any divergence; the queues
/// are the only inter-engine channel, so a divergence is a machine bug, not
/// a scheduling artifact.
pub fn check_interleavings(
    p: &DlcProgram,
    inputs: &MemImage,
    cfg: &VmConfig,
    seeds: &[u64],
) -> Result<RunResult, VmError> {
    let base = run(p, inputs, cfg)?;
    for seed in seeds {
        let r = run_interleaved(p, inputs, cfg, *seed)?;
        if !r.mem.bit_eq(&base.mem) {
            return Err(VmError::Internal(format!(
                "interleaving seed {seed} diverged from the reference run: memory differs"
            )));
        }
        if r.counters != base.counters {
            return Err(VmError::Internal(format!(
                "interleaving seed {seed} diverged from the reference run: counters differ \
                 ({:?} vs {:?})",
                r.counters, base.counters
            )));
        }
    }
    Ok(base)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Worked,
    Blocked,
    Idle,
}

enum Pending {
    Ctrl(u8),
    Data(Slot),
}

struct AFrame {
    level: usize,
    iv: u64,
    ub: u64,
}

struct AState {
    stack: Vec<AFrame>,
    pending: std::collections::VecDeque<Pending>,
    started: bool,
    done: bool,
}

struct LoopState {
    var: String,
    iv: u64,
    hi: u64,
    step: u64,
}

struct EFrame {
    stmts: Rc<Vec<CpuStmt>>,
    idx: usize,
    looping: Option<LoopState>,
}

struct EState {
    env: Env,
    frames: Vec<EFrame>,
    in_arm: bool,
    done: bool,
}

struct ExecHooks<'a> {
    n: &'a mut u64,
}

impl<'a> CpuHooks for ExecHooks<'a> {
    fn on_exec_mem_request(&mut self) {
        *self.n += 1;
    }
}

struct Vm<'p> {
    p: &'p DlcProgram,
    mem: MemImage,
    ctrlq: ByteQueue,
    dataq: SlotQueue,
    counters: Counters,
    cache: Option<CacheSim>,
    schedule: Schedule,
    rr_next_access: bool,
    // Access-side state.
    a: AState,
    streams_by_level: Vec<Vec<DlcStream>>,
    ops_beg: Vec<Vec<MarshalOp>>,
    ops_ite: Vec<Vec<MarshalOp>>,
    ops_end: Vec<Vec<MarshalOp>>,
    stream_vals: HashMap<String, VecVal>,
    // Execute-side state.
    e: EState,
    arms: HashMap<u8, Rc<Vec<CpuStmt>>>,
}

impl<'p> Vm<'p> {
    fn new(p: &'p DlcProgram, inputs: &MemImage, cfg: &VmConfig) -> Result<Vm<'p>, VmError> {
        if cfg.ctrl_capacity == 0 || cfg.data_capacity == 0 {
            return Err(VmError::Config("queue capacities must be at least 1".into()));
        }
        for param in &p.params {
            match param {
                crate::scf::Param::Scalar(s) => {
                    if inputs.scalar(s).is_none() {
                        return Err(VmError::Unbound(s.clone()));
                    }
                }
                crate::scf::Param::Mem(m) => {
                    if inputs.buffer(&m.name).is_none() {
                        return Err(VmError::Unbound(m.name.clone()));
                    }
                }
            }
        }
        let n = p.access.units.len();
        for u in &p.access.units {
            if u.width > 1 && u.id + 1 != n {
                return Err(VmError::Config(
                    "only the innermost traversal unit may be vector-wide".into(),
                ));
            }
        }
        let mut streams_by_level: Vec<Vec<DlcStream>> = vec![Vec::new(); n];
        for s in &p.access.streams {
            if s.level >= n {
                return Err(VmError::Config(format!(
                    "stream `{}` has no owning unit",
                    s.name
                )));
            }
            streams_by_level[s.level].push(s.clone());
        }
        let mut ops_beg: Vec<Vec<MarshalOp>> = vec![Vec::new(); n];
        let mut ops_ite: Vec<Vec<MarshalOp>> = vec![Vec::new(); n];
        let mut ops_end: Vec<Vec<MarshalOp>> = vec![Vec::new(); n];
        for m in &p.access.marshals {
            let (tu, ev) = match m {
                MarshalOp::Push { tu, event, .. } => (*tu, *event),
                MarshalOp::Trigger { tu, at, .. } => (*tu, *at),
                MarshalOp::Store { tu, .. } => (*tu, Event::Ite),
            };
            match ev {
                Event::Beg => ops_beg[tu].push(m.clone()),
                Event::Ite => ops_ite[tu].push(m.clone()),
                Event::End => ops_end[tu].push(m.clone()),
            }
        }
        let mut arms = HashMap::new();
        for arm in &p.execute.arms {
            arms.insert(arm.token.byte(), Rc::new(arm.body.clone()));
        }
        let mut env = Env::new();
        for (name, init) in &p.execute.locals {
            env.insert(name.clone(), Value::Scalar(Scalar::Index(*init)));
        }
        Ok(Vm {
            p,
            mem: inputs.clone(),
            ctrlq: ByteQueue::new(cfg.ctrl_capacity),
            dataq: SlotQueue::new(cfg.data_capacity),
            counters: Counters::default(),
            cache: cfg.cache.clone().map(CacheSim::new),
            schedule: cfg.schedule.clone(),
            rr_next_access: true,
            a: AState {
                stack: Vec::new(),
                pending: Default::default(),
                started: false,
                done: false,
            },
            streams_by_level,
            ops_beg,
            ops_ite,
            ops_end,
            stream_vals: HashMap::new(),
            e: EState {
                env,
                frames: Vec::new(),
                in_arm: false,
                done: false,
            },
            arms,
        })
    }

    fn run_to_completion(&mut self) -> Result<(), VmError> {
        let mut rng = match self.schedule {
            Schedule::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            Schedule::RoundRobin => None,
        };
        loop {
            if self.a.done && self.a.pending.is_empty() && self.e.done {
                break;
            }
            let access_first = match &mut rng {
                Some(r) => r.gen_bool(0.5),
                None => {
                    self.rr_next_access = !self.rr_next_access;
                    self.rr_next_access
                }
            };
            let (r1, r2) = if access_first {
                (self.step_access()?, self.step_execute()?)
            } else {
                (self.step_execute()?, self.step_access()?)
            };
            if r1 != Step::Worked && r2 != Step::Worked {
                let finished = self.a.done && self.a.pending.is_empty() && self.e.done;
                if !finished {
                    return Err(VmError::Deadlock {
                        ctrl: self.ctrlq.len(),
                        data: self.dataq.len(),
                        state: format!(
                            "access {} (stack depth {}), execute {}",
                            if self.a.done { "done" } else { "blocked" },
                            self.a.stack.len(),
                            if self.e.in_arm {
                                "mid-arm"
                            } else {
                                "awaiting token"
                            }
                        ),
                    });
                }
            }
        }
        // Conservation: a conformant program consumes everything it pushes.
        if self.counters.data_pops != self.counters.data_pushes
            || self.counters.ctrl_pops != self.counters.ctrl_pushes
        {
            return Err(VmError::Internal(format!(
                "queue conservation violated: data {}/{}, ctrl {}/{}",
                self.counters.data_pops,
                self.counters.data_pushes,
                self.counters.ctrl_pops,
                self.counters.ctrl_pushes
            )));
        }
        if let Some(c) = &self.cache {
            self.counters.cache = Some(c.stats.clone());
        }
        Ok(())
    }

    // -- Access engine -----------------------------------------------------

    fn step_access(&mut self) -> Result<Step, VmError> {
        if let Some(front) = self.a.pending.front() {
            let pushed = match front {
                Pending::Ctrl(b) => {
                    if self.ctrlq.push(*b) {
                        self.counters.ctrl_pushes += 1;
                        if *b != DONE_TOKEN {
                            self.counters.ctrl_tokens += 1;
                        }
                        true
                    } else {
                        false
                    }
                }
                Pending::Data(slot) => {
                    let width = slot.0.width() as u64;
                    if self.dataq.push(slot.clone()) {
                        self.counters.data_pushes += 1;
                        self.counters.data_elements += width;
                        true
                    } else {
                        false
                    }
                }
            };
            if pushed {
                self.a.pending.pop_front();
                return Ok(Step::Worked);
            }
            return Ok(Step::Blocked);
        }
        if self.a.done {
            return Ok(Step::Idle);
        }
        self.advance_traversal()?;
        Ok(Step::Worked)
    }

    fn advance_traversal(&mut self) -> Result<(), VmError> {
        if !self.a.started {
            self.a.started = true;
            if self.p.access.units.is_empty() {
                self.a.pending.push_back(Pending::Ctrl(DONE_TOKEN));
                self.a.done = true;
                return Ok(());
            }
            self.enter_unit(0)?;
            return Ok(());
        }
        let Some(top) = self.a.stack.last() else {
            self.a.pending.push_back(Pending::Ctrl(DONE_TOKEN));
            self.a.done = true;
            return Ok(());
        };
        let level = top.level;
        if top.iv < top.ub {
            // One iteration: evaluate the level's streams, marshal the
            // iteration ops, then descend or advance.
            self.eval_level_streams(level)?;
            self.marshal(level, Event::Ite)?;
            if level + 1 < self.p.access.units.len() {
                self.enter_unit(level + 1)?;
            } else {
                self.advance_iv(level);
            }
        } else {
            self.marshal(level, Event::End)?;
            self.a.stack.pop();
            if let Some(_parent) = self.a.stack.last() {
                let plevel = level - 1;
                self.advance_iv(plevel);
            } else {
                self.a.pending.push_back(Pending::Ctrl(DONE_TOKEN));
                self.a.done = true;
            }
        }
        Ok(())
    }

    fn advance_iv(&mut self, level: usize) {
        let u = &self.p.access.units[level];
        let delta = u.stride * u.width as u64;
        if let Some(f) = self.a.stack.iter_mut().find(|f| f.level == level) {
            f.iv += delta;
        }
    }

    fn enter_unit(&mut self, level: usize) -> Result<(), VmError> {
        let u = &self.p.access.units[level];
        let lo = self.operand_scalar(&u.lo)?;
        let ub = self.operand_scalar(&u.ub)?;
        self.a.stack.push(AFrame { level, iv: lo, ub });
        self.marshal(level, Event::Beg)?;
        Ok(())
    }

    /// Scalar value of an operand (bounds and scalar contexts).
    fn operand_scalar(&self, o: &DlcOperand) -> Result<u64, VmError> {
        match o {
            DlcOperand::Lit(v) => Ok(*v),
            DlcOperand::Scalar(s) => self
                .mem
                .scalar(s)
                .ok_or_else(|| VmError::Unbound(s.clone())),
            DlcOperand::DimSize(m, d) => self
                .mem
                .buffer(m)
                .and_then(|b| b.shape.get(*d).copied())
                .ok_or_else(|| VmError::Unbound(format!("dim({m}, {d})"))),
            DlcOperand::Ite(t) => self
                .a
                .stack
                .iter()
                .find(|f| f.level == *t)
                .map(|f| f.iv)
                .ok_or_else(|| VmError::Internal(format!("unit {t} is not live"))),
            DlcOperand::Stream(s) => {
                let v = self
                    .stream_vals
                    .get(s)
                    .ok_or_else(|| VmError::Internal(format!("stream `{s}` has no value")))?;
                v.lanes[0]
                    .as_index()
                    .ok_or_else(|| VmError::Internal(format!("stream `{s}` is not index-typed")))
            }
        }
    }

    /// Per-lane value of an operand during a (possibly vector) iteration.
    fn operand_lane(&self, o: &DlcOperand, lane: usize) -> Result<u64, VmError> {
        match o {
            DlcOperand::Ite(t) => {
                let f = self
                    .a
                    .stack
                    .iter()
                    .find(|f| f.level == *t)
                    .ok_or_else(|| VmError::Internal(format!("unit {t} is not live")))?;
                let u = &self.p.access.units[*t];
                if u.width > 1 {
                    Ok(f.iv + lane as u64 * u.stride)
                } else {
                    Ok(f.iv)
                }
            }
            DlcOperand::Stream(s) => {
                let v = self
                    .stream_vals
                    .get(s)
                    .ok_or_else(|| VmError::Internal(format!("stream `{s}` has no value")))?;
                let l = if v.width() == 1 { 0 } else { lane };
                v.lanes[l]
                    .as_index()
                    .ok_or_else(|| VmError::Internal(format!("stream `{s}` is not index-typed")))
            }
            other => self.operand_scalar(other),
        }
    }

    /// Live-lane mask of the current iteration of `level`.
    fn live(&self, level: usize, lane: usize) -> bool {
        let u = &self.p.access.units[level];
        match self.a.stack.iter().find(|f| f.level == level) {
            Some(f) => f.iv + lane as u64 * u.stride < f.ub,
            None => false,
        }
    }

    fn eval_level_streams(&mut self, level: usize) -> Result<(), VmError> {
        let streams = std::mem::take(&mut self.streams_by_level[level]);
        let result = self.eval_streams(level, &streams);
        self.streams_by_level[level] = streams;
        result
    }

    fn eval_streams(&mut self, level: usize, streams: &[DlcStream]) -> Result<(), VmError> {
        for s in streams {
            let width = s.width as usize;
            match &s.kind {
                DlcStreamKind::Alu { op, lhs, rhs } => {
                    let mut lanes = Vec::with_capacity(width);
                    for j in 0..width {
                        if width > 1 && !self.live(level, j) {
                            lanes.push(Scalar::Index(0));
                            continue;
                        }
                        let a = self.operand_lane(lhs, j)?;
                        let b = self.operand_lane(rhs, j)?;
                        let r = match crate::types::scalar_binop(
                            *op,
                            Scalar::Index(a),
                            Scalar::Index(b),
                        ) {
                            Ok(Scalar::Index(v)) => v,
                            Ok(_) => unreachable!(),
                            Err(e) => {
                                return Err(VmError::Internal(format!(
                                    "stream `{}`: {e}",
                                    s.name
                                )))
                            }
                        };
                        lanes.push(Scalar::Index(r));
                    }
                    self.stream_vals.insert(
                        s.name.clone(),
                        VecVal {
                            ty: ElemType::Index,
                            lanes,
                        },
                    );
                }
                DlcStreamKind::Mem { mem, index, hint } => {
                    let buf = self
                        .mem
                        .buffer(mem)
                        .ok_or_else(|| VmError::Unbound(mem.clone()))?;
                    let elem = buf.elem;
                    let len = buf.len();
                    let mut lanes = Vec::with_capacity(width);
                    let mut touched: Vec<u64> = Vec::with_capacity(width);
                    for j in 0..width {
                        if width > 1 && !self.live(level, j) {
                            lanes.push(Scalar::zero(elem));
                            continue;
                        }
                        let mut flat = 0u64;
                        for op in index {
                            flat += self.operand_lane(op, j)?;
                        }
                        let buf = self.mem.buffer(mem).unwrap();
                        let v = buf.get_flat(flat as usize).map_err(|e| VmError::Oob {
                            mem: mem.clone(),
                            detail: format!("{e} (stream `{}`)", s.name),
                        })?;
                        lanes.push(v);
                        touched.push(flat);
                    }
                    self.counters.mem_requests_access += 1;
                    if let Some(cache) = &mut self.cache {
                        cache.load(mem, len as u64, &touched, *hint);
                    }
                    self.stream_vals.insert(s.name.clone(), VecVal { ty: elem, lanes });
                }
            }
        }
        Ok(())
    }

    fn marshal(&mut self, level: usize, ev: Event) -> Result<(), VmError> {
        let ops = match ev {
            Event::Beg => std::mem::take(&mut self.ops_beg[level]),
            Event::Ite => std::mem::take(&mut self.ops_ite[level]),
            Event::End => std::mem::take(&mut self.ops_end[level]),
        };
        let result = self.marshal_ops(level, &ops);
        match ev {
            Event::Beg => self.ops_beg[level] = ops,
            Event::Ite => self.ops_ite[level] = ops,
            Event::End => self.ops_end[level] = ops,
        }
        result
    }

    fn marshal_ops(&mut self, level: usize, ops: &[MarshalOp]) -> Result<(), VmError> {
        for op in ops {
            match op {
                MarshalOp::Trigger { tu, event, .. } => {
                    let t = Token {
                        tu: *tu,
                        event: *event,
                    };
                    self.a.pending.push_back(Pending::Ctrl(t.byte()));
                }
                MarshalOp::Push { source, width, .. } => {
                    let val = match source {
                        PushSource::IteBase(t) => {
                            let iv = self
                                .a
                                .stack
                                .iter()
                                .find(|f| f.level == *t)
                                .map(|f| f.iv)
                                .ok_or_else(|| {
                                    VmError::Internal(format!("unit {t} is not live"))
                                })?;
                            VecVal {
                                ty: ElemType::Index,
                                lanes: vec![Scalar::Index(iv)],
                            }
                        }
                        PushSource::Stream(s) => self
                            .stream_vals
                            .get(s)
                            .cloned()
                            .ok_or_else(|| {
                                VmError::Internal(format!("stream `{s}` has no value"))
                            })?,
                    };
                    let val = pad_to(val, *width as usize);
                    self.a.pending.push_back(Pending::Data(Slot(val)));
                }
                MarshalOp::Store {
                    mem,
                    index,
                    value,
                    width,
                    ..
                } => {
                    let val = self
                        .stream_vals
                        .get(value)
                        .cloned()
                        .ok_or_else(|| VmError::Internal(format!("stream `{value}` has no value")))?;
                    self.counters.mem_requests_access += 1;
                    for j in 0..*width as usize {
                        if *width > 1 && !self.live(level, j) {
                            continue;
                        }
                        let mut flat = 0u64;
                        for op in index {
                            flat += self.operand_lane(op, j)?;
                        }
                        let lane = if val.width() == 1 { val.lanes[0] } else { val.lanes[j] };
                        let buf = self
                            .mem
                            .buffers
                            .get_mut(mem)
                            .ok_or_else(|| VmError::Unbound(mem.clone()))?;
                        buf.set_flat(flat as usize, lane).map_err(|e| VmError::Oob {
                            mem: mem.clone(),
                            detail: e.to_string(),
                        })?;
                        self.counters.store_stream_writes += 1;
                    }
                }
            }
        }
        Ok(())
    }

    // -- Execute engine ----------------------------------------------------

    fn step_execute(&mut self) -> Result<Step, VmError> {
        if self.e.done {
            return Ok(Step::Idle);
        }
        if !self.e.in_arm {
            let Some(tok) = self.ctrlq.pop() else {
                return Ok(Step::Blocked);
            };
            self.counters.ctrl_pops += 1;
            if tok == DONE_TOKEN {
                self.e.done = true;
                return Ok(Step::Worked);
            }
            let body = self
                .arms
                .get(&tok)
                .cloned()
                .ok_or_else(|| VmError::Internal(format!("no arm for token {tok}")))?;
            self.counters.callback_invocations += 1;
            self.e.in_arm = true;
            self.e.frames.push(EFrame {
                stmts: body,
                idx: 0,
                looping: None,
            });
            return Ok(Step::Worked);
        }
        // One statement (or one frame transition) per step.
        let Some(top) = self.e.frames.last_mut() else {
            self.e.in_arm = false;
            return Ok(Step::Worked);
        };
        if top.idx >= top.stmts.len() {
            // Frame exhausted: advance the loop or pop.
            if let Some(ls) = &mut top.looping {
                ls.iv += ls.step;
                if ls.iv < ls.hi {
                    let var = ls.var.clone();
                    let iv = ls.iv;
                    top.idx = 0;
                    self.e.env.insert(var, Value::Scalar(Scalar::Index(iv)));
                    return Ok(Step::Worked);
                }
            }
            self.e.frames.pop();
            if let Some(parent) = self.e.frames.last_mut() {
                parent.idx += 1;
            } else {
                self.e.in_arm = false;
            }
            return Ok(Step::Worked);
        }
        let stmt = top.stmts[top.idx].clone();
        match stmt {
            CpuStmt::Pop { ty, width, var } => {
                let Some(slot) = self.dataq.pop() else {
                    return Ok(Step::Blocked);
                };
                if slot.0.ty != ty || slot.0.width() != width as usize {
                    return Err(VmError::Internal(format!(
                        "pop of {width} x {ty} found a {} x {} slot",
                        slot.0.width(),
                        slot.0.ty
                    )));
                }
                self.counters.data_pops += 1;
                self.counters.data_elements_popped += width as u64;
                let value = if width == 1 {
                    Value::Scalar(slot.0.lanes[0])
                } else {
                    Value::Vec(slot.0)
                };
                self.e.env.insert(var, value);
                if let Some(top) = self.e.frames.last_mut() {
                    top.idx += 1;
                }
                Ok(Step::Worked)
            }
            CpuStmt::For {
                var,
                lo,
                hi,
                step,
                body,
            } => {
                let lo = self.eval_index(&lo)?;
                let hi = self.eval_index(&hi)?;
                if lo < hi {
                    self.e
                        .env
                        .insert(var.clone(), Value::Scalar(Scalar::Index(lo)));
                    self.e.frames.push(EFrame {
                        stmts: Rc::new(body),
                        idx: 0,
                        looping: Some(LoopState {
                            var,
                            iv: lo,
                            hi,
                            step,
                        }),
                    });
                } else if let Some(top) = self.e.frames.last_mut() {
                    top.idx += 1;
                }
                Ok(Step::Worked)
            }
            other => {
                let mut hooks = ExecHooks {
                    n: &mut self.counters.mem_requests_execute,
                };
                cpu::exec_simple_stmt(&other, &mut self.e.env, &mut self.mem, &mut hooks)
                    .map_err(|e| match e {
                        cpu::CpuError::Oob { mem, source } => VmError::Oob {
                            mem,
                            detail: source.to_string(),
                        },
                        e => VmError::Internal(e.to_string()),
                    })?;
                if let Some(top) = self.e.frames.last_mut() {
                    top.idx += 1;
                }
                Ok(Step::Worked)
            }
        }
    }

    fn eval_index(&mut self, e: &crate::cpu::CpuExpr) -> Result<u64, VmError> {
        let mut hooks = ExecHooks {
            n: &mut self.counters.mem_requests_execute,
        };
        let v = cpu::eval_expr(e, &self.e.env, &self.mem, &mut hooks)
            .map_err(|e| VmError::Internal(e.to_string()))?;
        v.as_index()
            .ok_or_else(|| VmError::Internal("loop bound is not an index".into()))
    }
}

fn pad_to(v: VecVal, width: usize) -> VecVal {
    if v.width() == width {
        return v;
    }
    let mut lanes = Vec::with_capacity(width);
    lanes.push(v.lanes[0]);
    while lanes.len() < width {
        lanes.push(Scalar::zero(v.ty));
    }
    VecVal { ty: v.ty, lanes }
}
