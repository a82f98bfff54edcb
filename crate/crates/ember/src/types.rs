//! Element types, literals, and runtime values shared by every IR level.

use std::fmt;

/// Element type of memory buffers, streams, and expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemType {
    /// Machine-width unsigned integer used for indices and loop bounds.
    Index,
    I32,
    F32,
}

impl ElemType {
    pub fn is_integer(self) -> bool {
        matches!(self, ElemType::Index | ElemType::I32)
    }
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemType::Index => write!(f, "idx"),
            ElemType::I32 => write!(f, "i32"),
            ElemType::F32 => write!(f, "f32"),
        }
    }
}

/// Binary arithmetic operators. Division truncates toward zero on integers;
/// remainder follows the sign of the dividend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        Some(match s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A literal constant. Integer literals are polymorphic between `idx` and
/// `i32` until type checking pins them down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lit {
    Int(u64),
    F32(f32),
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lit::Int(v) => write!(f, "{v}"),
            Lit::F32(v) => {
                if v.fract() == 0.0 && v.is_finite() && v.abs() < 1e16 {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v}")
                }
            }
        }
    }
}

/// Scalar runtime value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    Index(u64),
    I32(i32),
    F32(f32),
}

impl Scalar {
    pub fn ty(self) -> ElemType {
        match self {
            Scalar::Index(_) => ElemType::Index,
            Scalar::I32(_) => ElemType::I32,
            Scalar::F32(_) => ElemType::F32,
        }
    }

    pub fn zero(ty: ElemType) -> Scalar {
        match ty {
            ElemType::Index => Scalar::Index(0),
            ElemType::I32 => Scalar::I32(0),
            ElemType::F32 => Scalar::F32(0.0),
        }
    }

    pub fn as_index(self) -> Option<u64> {
        match self {
            Scalar::Index(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f32(self) -> Option<f32> {
        match self {
            Scalar::F32(v) => Some(v),
            _ => None,
        }
    }

    /// Bit-level equality: NaN == NaN, +0.0 != -0.0.
    pub fn bit_eq(self, other: Scalar) -> bool {
        match (self, other) {
            (Scalar::Index(a), Scalar::Index(b)) => a == b,
            (Scalar::I32(a), Scalar::I32(b)) => a == b,
            (Scalar::F32(a), Scalar::F32(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Index(v) => write!(f, "{v}"),
            Scalar::I32(v) => write!(f, "{v}"),
            Scalar::F32(v) => write!(f, "{v}"),
        }
    }
}

/// Apply a binary operator to two scalars of the same element type.
/// Integer overflow/underflow and division by zero are reported, not wrapped.
pub fn scalar_binop(op: BinOp, a: Scalar, b: Scalar) -> Result<Scalar, ArithError> {
    match (a, b) {
        (Scalar::Index(x), Scalar::Index(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Div => {
                    if y == 0 {
                        return Err(ArithError::DivByZero);
                    }
                    Some(x / y)
                }
                BinOp::Rem => {
                    if y == 0 {
                        return Err(ArithError::DivByZero);
                    }
                    Some(x % y)
                }
            };
            r.map(Scalar::Index).ok_or(ArithError::IndexOverflow { op, a: x, b: y })
        }
        (Scalar::I32(x), Scalar::I32(y)) => {
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Div => {
                    if y == 0 {
                        return Err(ArithError::DivByZero);
                    }
                    x.checked_div(y)
                }
                BinOp::Rem => {
                    if y == 0 {
                        return Err(ArithError::DivByZero);
                    }
                    x.checked_rem(y)
                }
            };
            r.map(Scalar::I32).ok_or(ArithError::I32Overflow)
        }
        (Scalar::F32(x), Scalar::F32(y)) => {
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Rem => return Err(ArithError::FloatRem),
            };
            Ok(Scalar::F32(r))
        }
        _ => Err(ArithError::TypeMismatch {
            lhs: a.ty(),
            rhs: b.ty(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArithError {
    #[error("division or remainder by zero")]
    DivByZero,
    #[error("index arithmetic out of range: {a} {op} {b}")]
    IndexOverflow { op: BinOp, a: u64, b: u64 },
    #[error("i32 arithmetic overflow")]
    I32Overflow,
    #[error("remainder is not defined on f32 operands")]
    FloatRem,
    #[error("operand types differ: {lhs} vs {rhs}")]
    TypeMismatch { lhs: ElemType, rhs: ElemType },
}

/// A fixed-width vector of scalars of one element type. Width is the slot
/// width; masked-off lanes hold the additive identity.
#[derive(Debug, Clone, PartialEq)]
pub struct VecVal {
    pub ty: ElemType,
    pub lanes: Vec<Scalar>,
}

impl VecVal {
    pub fn zeros(ty: ElemType, width: usize) -> VecVal {
        VecVal {
            ty,
            lanes: vec![Scalar::zero(ty); width],
        }
    }

    pub fn width(&self) -> usize {
        self.lanes.len()
    }

    pub fn bit_eq(&self, other: &VecVal) -> bool {
        self.ty == other.ty
            && self.lanes.len() == other.lanes.len()
            && self.lanes.iter().zip(&other.lanes).all(|(a, b)| a.bit_eq(*b))
    }
}

/// Per-lane validity mask. Lane i live iff `live[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub live: Vec<bool>,
}

impl Mask {
    pub fn all(width: usize) -> Mask {
        Mask {
            live: vec![true; width],
        }
    }

    /// Remainder mask: lane i live iff offset + i < bound.
    pub fn remainder(offset: u64, bound: u64, width: usize) -> Mask {
        Mask {
            live: (0..width as u64).map(|i| offset + i < bound).collect(),
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|l| **l).count()
    }

    pub fn width(&self) -> usize {
        self.live.len()
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, l) in self.live.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", if *l { 1 } else { 0 })?;
        }
        write!(f, "]")
    }
}

/// Any value the CPU-statement evaluator can produce.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(Scalar),
    Vec(VecVal),
    Mask(Mask),
    /// Buffered vector chunks captured from a buffer stream.
    Chunks(Vec<VecVal>),
}

impl Value {
    pub fn as_scalar(&self) -> Option<Scalar> {
        match self {
            Value::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_index(&self) -> Option<u64> {
        self.as_scalar().and_then(|s| s.as_index())
    }
}

/// Type of a CPU-level variable: scalar, vector, mask, or buffered chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValType {
    Scalar(ElemType),
    Vec(ElemType, u32),
    Mask(u32),
    Chunks(ElemType, u32),
}

impl fmt::Display for ValType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValType::Scalar(t) => write!(f, "{t}"),
            ValType::Vec(t, w) => write!(f, "vec<{w} x {t}>"),
            ValType::Mask(w) => write!(f, "vmask<{w}>"),
            ValType::Chunks(t, w) => write!(f, "chunks<{w} x {t}>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_arithmetic_is_checked() {
        assert_eq!(
            scalar_binop(BinOp::Add, Scalar::Index(2), Scalar::Index(3)),
            Ok(Scalar::Index(5))
        );
        assert!(scalar_binop(BinOp::Sub, Scalar::Index(1), Scalar::Index(2)).is_err());
        assert!(scalar_binop(BinOp::Div, Scalar::Index(1), Scalar::Index(0)).is_err());
    }

    #[test]
    fn f32_ops_are_plain_ieee() {
        let r = scalar_binop(BinOp::Add, Scalar::F32(0.1), Scalar::F32(0.2)).unwrap();
        assert_eq!(r, Scalar::F32(0.1f32 + 0.2f32));
        assert!(scalar_binop(BinOp::Rem, Scalar::F32(1.0), Scalar::F32(2.0)).is_err());
    }

    #[test]
    fn remainder_mask() {
        let m = Mask::remainder(4, 5, 4);
        assert_eq!(m.live, vec![true, false, false, false]);
        assert_eq!(m.live_count(), 1);
        assert_eq!(m.to_string(), "[1,0,0,0]");
    }
}
