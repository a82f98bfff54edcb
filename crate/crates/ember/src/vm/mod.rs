//! The simulated two-engine machine: a dataflow access engine and an
//! imperative execute engine joined by bounded FIFO queues, plus memory,
//! instrumentation counters, and an optional two-level LRU cache model.
//!
//! The only state the engines share is the two queues and the memory image,
//! and the access engine never reads a memref the execute engine writes, so
//! results and counters are identical under every fair interleaving.

mod cache;
mod machine;
mod queue;

pub use cache::{CacheModelConfig, CacheSim, CacheStats, LevelStats};
pub use machine::{check_interleavings, run, run_interleaved, RunResult, VmError};

use serde::Serialize;

#[derive(Debug, Clone)]
pub enum Schedule {
    /// Alternate engines every step.
    RoundRobin,
    /// Seeded random fair interleaving.
    Seeded(u64),
}

#[derive(Debug, Clone)]
pub struct VmConfig {
    /// Control-queue capacity in tokens.
    pub ctrl_capacity: usize,
    /// Data-queue capacity in slots (one slot per push, scalar or vector).
    pub data_capacity: usize,
    pub schedule: Schedule,
    pub cache: Option<CacheModelConfig>,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig {
            ctrl_capacity: 64,
            data_capacity: 512,
            schedule: Schedule::RoundRobin,
            cache: None,
        }
    }
}

/// Instrumentation counters. Deterministic for a given (program, inputs,
/// config); schedule seeds never change them.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Counters {
    /// Control-queue pushes including the final `done` sentinel.
    pub ctrl_pushes: u64,
    /// Callback tokens only (excludes `done`).
    pub ctrl_tokens: u64,
    pub ctrl_pops: u64,
    /// Data-queue slots pushed (a vector push is one slot).
    pub data_pushes: u64,
    pub data_pops: u64,
    /// Scalar elements pushed, counting every lane of a vector slot
    /// (padding included).
    pub data_elements: u64,
    pub data_elements_popped: u64,
    /// One per memory-stream evaluation (per vector chunk).
    pub mem_requests_access: u64,
    pub mem_requests_execute: u64,
    pub callback_invocations: u64,
    /// Elements written directly by store streams.
    pub store_stream_writes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<CacheStats>,
}

impl Counters {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap();
        v["version"] = serde_json::json!(1);
        serde_json::to_string_pretty(&v).unwrap()
    }
}
