//! The structured lookup-compute IR: loops-as-streams plus callbacks holding
//! compute statements. All global optimizations run on this form. The
//! vectorized extension (SLCV) adds a vector length and a per-iteration mask
//! to a loop.

mod interp;
mod parse;
mod print;
mod verify;

pub use interp::{interpret_slc, interpret_slc_with_stats, SlcInterpError, SlcStats};
pub use parse::parse_slc;
pub use print::print_slc;
pub use verify::verify_slc;

use crate::cpu::CpuStmt;
use crate::scf::Param;
use crate::types::{BinOp, ElemType, ValType};

/// A loop-range endpoint: a stream produced by an ancestor loop, a scalar
/// parameter, or an unsigned literal.
#[derive(Debug, Clone, PartialEq)]
pub enum RangeRef {
    Stream(String),
    Var(String),
    Lit(u64),
}

/// An operand of a stream expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Stream(String),
    Var(String),
    Lit(u64),
}

/// One dimension index of a load/store stream: an operand plus an optional
/// literal offset (`ptrs[s_b + 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexOperand {
    pub base: Operand,
    pub offset: u64,
}

impl IndexOperand {
    pub fn stream(name: &str) -> IndexOperand {
        IndexOperand {
            base: Operand::Stream(name.to_string()),
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheLevel {
    L1,
    L2,
    Llc,
}

impl std::fmt::Display for CacheLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CacheLevel::L1 => write!(f, "L1"),
            CacheLevel::L2 => write!(f, "L2"),
            CacheLevel::Llc => write!(f, "LLC"),
        }
    }
}

/// Cache routing hint carried by load streams; no semantic effect, only the
/// VM's cache model reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadHint {
    pub cache_level: CacheLevel,
    pub temporal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    /// Loads `mem[idx...]`; width > 1 makes it a masked vector load along
    /// the fastest-varying dimension.
    Load {
        mem: String,
        idx: Vec<IndexOperand>,
        width: u32,
        mask: Option<String>,
        hint: Option<LoadHint>,
    },
    /// Integer ALU stream over two operands; lane-wise when width > 1.
    Alu {
        op: BinOp,
        lhs: Operand,
        rhs: Operand,
        width: u32,
    },
    /// Buffer stream collecting one vector chunk per inner-loop iteration.
    Buf { elem: ElemType, vlen: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDecl {
    pub name: String,
    pub kind: StreamKind,
}

/// Loop-carried index variable introduced by queue alignment; initialized at
/// loop entry, updated only in end-callbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct CarriedVar {
    pub name: String,
    pub init: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToValKind {
    /// `slc.to_val(s)` on a scalar stream.
    Scalar,
    /// `slcv.to_val(s)[0]` — lane 0 of a vector stream.
    Lane0,
    /// `slcv.to_val<w>(s)` — the full vector chunk.
    Vector,
    /// `slcv.to_val(msk)` — the loop mask.
    MaskRead,
    /// `slc.to_val(buf)` — all chunks buffered since the last trigger;
    /// consuming them empties the buffer.
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToVal {
    pub var: String,
    pub ty: ValType,
    pub stream: String,
    pub kind: ToValKind,
    /// Queue alignment: pad this scalar to a full vector slot of the given
    /// width when marshaled (lane 0 carries the value).
    pub padded: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Callback {
    pub tovals: Vec<ToVal>,
    pub stmts: Vec<CpuStmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlcItem {
    Decl(StreamDecl),
    /// `slc.push(buf, src)` — append the source chunk to a parent buffer.
    Push { buf: String, src: String },
    /// Direct store stream: write `value` to `mem[idx...]` on the access
    /// side without triggering a callback.
    StoreStream {
        mem: String,
        idx: Vec<IndexOperand>,
        value: String,
        width: u32,
        mask: Option<String>,
    },
    Loop(SlcLoop),
    Call(Callback),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlcLoop {
    /// Name of the induction stream.
    pub stream: String,
    /// Mask stream name; present iff `vlen` is set.
    pub mask: Option<String>,
    pub vlen: Option<u32>,
    pub lo: RangeRef,
    pub hi: RangeRef,
    pub step: u64,
    pub carried: Vec<CarriedVar>,
    pub items: Vec<SlcItem>,
}

impl SlcLoop {
    pub fn decls(&self) -> impl Iterator<Item = &StreamDecl> {
        self.items.iter().filter_map(|i| match i {
            SlcItem::Decl(d) => Some(d),
            _ => None,
        })
    }

    pub fn inner_loop(&self) -> Option<&SlcLoop> {
        self.items.iter().find_map(|i| match i {
            SlcItem::Loop(l) => Some(l),
            _ => None,
        })
    }

    pub fn inner_loop_mut(&mut self) -> Option<&mut SlcLoop> {
        self.items.iter_mut().find_map(|i| match i {
            SlcItem::Loop(l) => Some(l),
            _ => None,
        })
    }

    /// Callback before the nested loop (or the leaf callback when there is
    /// no nested loop and it is the only callback).
    pub fn begin_call(&self) -> Option<&Callback> {
        let loop_pos = self.items.iter().position(|i| matches!(i, SlcItem::Loop(_)));
        self.items.iter().enumerate().find_map(|(k, i)| match i {
            SlcItem::Call(c) if loop_pos.map(|lp| k < lp).unwrap_or(false) => Some(c),
            _ => None,
        })
    }

    /// Callback after the nested loop, or the leaf callback.
    pub fn end_call(&self) -> Option<&Callback> {
        let loop_pos = self.items.iter().position(|i| matches!(i, SlcItem::Loop(_)));
        self.items.iter().enumerate().find_map(|(k, i)| match i {
            SlcItem::Call(c) if loop_pos.map(|lp| k > lp).unwrap_or(true) => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlcFunction {
    pub name: String,
    pub params: Vec<Param>,
    /// Top level: stream-free items plus at most one loop, or a single
    /// callback for pure-compute functions.
    pub items: Vec<SlcItem>,
}

impl SlcFunction {
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

    pub fn root_loop(&self) -> Option<&SlcLoop> {
        self.items.iter().find_map(|i| match i {
            SlcItem::Loop(l) => Some(l),
            _ => None,
        })
    }

    pub fn root_loop_mut(&mut self) -> Option<&mut SlcLoop> {
        self.items.iter_mut().find_map(|i| match i {
            SlcItem::Loop(l) => Some(l),
            _ => None,
        })
    }

    /// The loop-nest chain from the root to the innermost loop.
    pub fn loop_chain(&self) -> Vec<&SlcLoop> {
        let mut chain = Vec::new();
        let mut cur = self.root_loop();
        while let Some(l) = cur {
            chain.push(l);
            cur = l.inner_loop();
        }
        chain
    }

    /// Count callbacks in the whole function.
    pub fn callback_count(&self) -> usize {
        fn count(items: &[SlcItem]) -> usize {
            items
                .iter()
                .map(|i| match i {
                    SlcItem::Call(_) => 1,
                    SlcItem::Loop(l) => count(&l.items),
                    _ => 0,
                })
                .sum()
        }
        count(&self.items)
    }
}
