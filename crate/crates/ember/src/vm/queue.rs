//! Bounded FIFO queues between the engines: a byte queue for control tokens
//! and a typed-slot queue for data. Push fails when full, pop when empty;
//! callers treat both as backpressure.

use crate::types::VecVal;
use std::collections::VecDeque;

#[derive(Debug)]
pub struct ByteQueue {
    cap: usize,
    q: VecDeque<u8>,
}

impl ByteQueue {
    pub fn new(cap: usize) -> ByteQueue {
        ByteQueue {
            cap,
            q: VecDeque::with_capacity(cap.min(1024)),
        }
    }

    pub fn push(&mut self, b: u8) -> bool {
        if self.q.len() >= self.cap {
            return false;
        }
        self.q.push_back(b);
        true
    }

    pub fn pop(&mut self) -> Option<u8> {
        self.q.pop_front()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }
}

/// One data slot: a scalar (width 1) or a vector chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot(pub VecVal);

#[derive(Debug)]
pub struct SlotQueue {
    cap: usize,
    q: VecDeque<Slot>,
}

impl SlotQueue {
    pub fn new(cap: usize) -> SlotQueue {
        SlotQueue {
            cap,
            q: VecDeque::with_capacity(cap.min(1024)),
        }
    }

    pub fn push(&mut self, s: Slot) -> bool {
        if self.q.len() >= self.cap {
            return false;
        }
        self.q.push_back(s);
        true
    }

    pub fn pop(&mut self) -> Option<Slot> {
        self.q.pop_front()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ElemType, Scalar};

    #[test]
    fn fifo_order_and_backpressure() {
        let mut q = SlotQueue::new(2);
        let mk = |v: u64| {
            Slot(VecVal {
                ty: ElemType::Index,
                lanes: vec![Scalar::Index(v)],
            })
        };
        assert!(q.push(mk(1)));
        assert!(q.push(mk(2)));
        assert!(!q.push(mk(3)), "full queue rejects");
        assert_eq!(q.pop(), Some(mk(1)));
        assert!(q.push(mk(3)));
        assert_eq!(q.pop(), Some(mk(2)));
        assert_eq!(q.pop(), Some(mk(3)));
        assert_eq!(q.pop(), None);
    }
}
