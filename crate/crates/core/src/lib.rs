//! Synchronous LOCAL-model simulator with distributed graph algorithms that
//! take predictions of their outputs.

pub mod bench;
pub mod engine;
pub mod graph;
pub mod measures;
pub mod problem;
pub mod programs;
pub mod rng;
pub mod templates;
