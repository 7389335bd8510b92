//! A small feed-forward inference runtime.
//!
//! Graphs are immutable after loading and may be evaluated concurrently.
//! Every kernel accumulates in a fixed order (the kernel window or input
//! vector in row-major order, innermost index fastest, in `f32`, bias added
//! last), so evaluating a node directly, through a truncated graph or inside
//! a mini-batch of any size gives bitwise identical results.

mod error;
mod eval;
mod format;
mod graph;
pub mod reference;
mod tensor;

pub use error::GraphError;
pub use format::{load_graph, save_graph, weights_file_of, MAGIC};
pub use graph::{ComputationGraph, GraphNode, Op, WeightBlock};
pub use tensor::Tensor;
