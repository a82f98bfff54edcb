//! Ember: a compiler pipeline and instrumented virtual machine for embedding
//! operations on decoupled access-execute machines.
//!
//! The pipeline parses a structured imperative loop program, splits it into
//! lookup (access) and compute (execute) code, optimizes the structured form
//! (vectorization, bufferization, queue alignment, stream hints), lowers to a
//! two-program dataflow/token-dispatch form, and executes it on a simulated
//! two-engine machine with FIFO queues and full instrumentation. A scalar
//! reference interpreter provides the correctness oracle at every stage.

pub mod cpu;
pub mod decouple;
pub mod diag;
pub mod dlc;
pub mod lex;
pub mod mem;
pub mod passes;
pub mod scf;
pub mod slc;
pub mod types;
pub mod vm;
pub mod workloads;

pub mod cli;
