//! The decoupled lookup-compute form: a dataflow access program (traversal
//! units, streams, marshal ops) paired with an imperative execute program
//! that dispatches on control-queue tokens. This is the machine-level IR the
//! VM runs.

mod lower;
mod text;
mod verify;

pub use lower::lower_slc_to_dlc;
pub use text::{parse_dlc, print_dlc};
pub use verify::{access_read_set, verify_dlc};

use crate::cpu::CpuStmt;
use crate::scf::Param;
use crate::slc::LoadHint;
use crate::types::{BinOp, ElemType};

/// Traversal events, in token-encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Beg,
    Ite,
    End,
}

impl Event {
    pub fn code(self) -> u8 {
        match self {
            Event::Beg => 0,
            Event::Ite => 1,
            Event::End => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Event::Beg => "beg",
            Event::Ite => "ite",
            Event::End => "end",
        }
    }
}

/// Control-queue token: `unit*3 + event`, with 255 reserved for `done`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token {
    pub tu: usize,
    pub event: Event,
}

pub const DONE_TOKEN: u8 = 255;

impl Token {
    pub fn byte(self) -> u8 {
        (self.tu as u8) * 3 + self.event.code()
    }
}

/// Operand of a traversal unit bound or stream expression.
#[derive(Debug, Clone, PartialEq)]
pub enum DlcOperand {
    Stream(String),
    /// Induction stream of a unit.
    Ite(usize),
    Lit(u64),
    /// Runtime-bound scalar parameter.
    Scalar(String),
    /// Runtime size of one dimension of a memref (dynamic-shape stride).
    DimSize(String, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalUnit {
    pub id: usize,
    pub name: String,
    pub lo: DlcOperand,
    pub ub: DlcOperand,
    pub stride: u64,
    /// Lanes per iteration; > 1 for the vectorized innermost unit, whose
    /// remainder lanes are implicitly masked.
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DlcStreamKind {
    /// Flat load: address is the sum of the index operands (one or two).
    Mem {
        mem: String,
        index: Vec<DlcOperand>,
        hint: Option<LoadHint>,
    },
    Alu {
        op: BinOp,
        lhs: DlcOperand,
        rhs: DlcOperand,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlcStream {
    pub name: String,
    /// Owning traversal unit; the stream evaluates once per its iteration.
    pub level: usize,
    pub width: u32,
    pub kind: DlcStreamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PushSource {
    Stream(String),
    /// Scalar base (lane 0) of a unit's induction.
    IteBase(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarshalOp {
    /// Push the source into the data queue at every (tu, event). A width
    /// wider than the source pads with zero lanes (lane 0 holds the value).
    Push {
        source: PushSource,
        tu: usize,
        event: Event,
        width: u32,
    },
    /// Push the token for (tu, event) into the control queue. `at` is the
    /// traversal event that emits it: a vector-draining end callback is
    /// announced when its chunk stream starts, so the core can consume
    /// chunks as they arrive instead of waiting for a full vector to queue.
    Trigger { tu: usize, event: Event, at: Event },
    /// Write the value stream directly to memory at every iteration of the
    /// owning unit, bypassing both queues.
    Store {
        mem: String,
        index: Vec<DlcOperand>,
        value: String,
        tu: usize,
        width: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessProgram {
    pub units: Vec<TraversalUnit>,
    pub streams: Vec<DlcStream>,
    pub marshals: Vec<MarshalOp>,
}

impl AccessProgram {
    pub fn stream(&self, name: &str) -> Option<&DlcStream> {
        self.streams.iter().find(|s| s.name == name)
    }

    pub fn pushes_at(&self, tu: usize, event: Event) -> Vec<&MarshalOp> {
        self.marshals
            .iter()
            .filter(|m| matches!(m, MarshalOp::Push { tu: t, event: e, .. } if *t == tu && *e == event))
            .collect()
    }

    pub fn triggers(&self) -> Vec<Token> {
        self.marshals
            .iter()
            .filter_map(|m| match m {
                MarshalOp::Trigger { tu, event, .. } => Some(Token {
                    tu: *tu,
                    event: *event,
                }),
                _ => None,
            })
            .collect()
    }
}

/// One dispatch arm of the execute program's token loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub token: Token,
    pub body: Vec<CpuStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecuteProgram {
    /// Persistent local variables (queue-aligned counters), with initial
    /// values.
    pub locals: Vec<(String, u64)>,
    pub arms: Vec<Arm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlcProgram {
    pub name: String,
    pub params: Vec<Param>,
    pub access: AccessProgram,
    pub execute: ExecuteProgram,
}

impl DlcProgram {
    pub fn memref(&self, name: &str) -> Option<&crate::mem::MemRef> {
        self.params.iter().find_map(|p| match p {
            Param::Mem(m) if m.name == name => Some(m),
            _ => None,
        })
    }

    pub fn is_scalar_param(&self, name: &str) -> bool {
        self.params
            .iter()
            .any(|p| matches!(p, Param::Scalar(s) if s == name))
    }

    pub fn unit(&self, id: usize) -> Option<&TraversalUnit> {
        self.access.units.get(id)
    }

    pub fn unit_by_name(&self, name: &str) -> Option<&TraversalUnit> {
        self.access.units.iter().find(|u| u.name == name)
    }

    /// Push count (data-queue marshal ops, not triggers or stores).
    pub fn push_count(&self) -> usize {
        self.access
            .marshals
            .iter()
            .filter(|m| matches!(m, MarshalOp::Push { .. }))
            .count()
    }

    pub fn trigger_count(&self) -> usize {
        self.access
            .marshals
            .iter()
            .filter(|m| matches!(m, MarshalOp::Trigger { .. }))
            .count()
    }

    /// Element type a memref load/store moves, from the shared signature.
    pub fn elem_of(&self, mem: &str) -> Option<ElemType> {
        self.memref(mem).map(|m| m.elem)
    }
}

impl crate::cpu::MemSig for DlcProgram {
    fn mem_info(&self, name: &str) -> Option<(ElemType, usize)> {
        self.memref(name).map(|m| (m.elem, m.rank()))
    }

    fn is_scalar_param(&self, name: &str) -> bool {
        DlcProgram::is_scalar_param(self, name)
    }
}
