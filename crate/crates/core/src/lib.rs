//! Directed grey-box fuzzing for TIR, a small textual intermediate
//! representation.
//!
//! The pipeline runs in three stages. A static analyzer parses a TIR program
//! and derives points-to facts, a call graph, a value-flow graph, hybrid
//! slices, boundary blocks, per-block control-flow distances, and per-block
//! value-flow influence scores. An instrumentation plan selects which blocks
//! report which feedback channel. The fuzzer then executes the program on
//! mutated inputs, scheduling seeds by distance and allocating energy with an
//! annealed schedule over the hybrid feedback.

pub mod analysis;
pub mod cli;
pub mod distance;
pub mod fuzzer;
pub mod ir;
pub mod report;
pub mod runtime;
pub mod slicing;
pub mod valueflow;

mod hash;

pub use hash::stable_hash64;
