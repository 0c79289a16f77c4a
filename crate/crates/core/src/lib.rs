//! Graph mini-batching for fixed-shape (JIT compiled) training steps.
//!
//! Four batching algorithms are provided:
//!
//! * **static-64** and **static-2^N** take `batch_size - 1` graphs per step and
//!   pad node and edge totals up to the next multiple of 64 or power of two;
//! * **static-constant** pads every batch to a budget derived from the
//!   largest graph in the dataset;
//! * **dynamic** adds graphs one at a time until the next one would overflow a
//!   budget estimated from the mean graph size, then pads to that budget.
//!
//! A shape registry counts how often a JIT compiler would rebuild the update
//! step, and [`experiment`] wires everything into reproducible benchmark runs.

pub mod batchers;
pub mod compile_sim;
pub mod datagen;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod graph;
pub mod padding;
pub mod stats;

pub use batchers::{
    cycle_shuffle_stream, dynamic_batcher, estimate_padding_budget, scan_max_budget,
    static_batcher, Algorithm, Batcher, ConstantFactor, DynamicBatcher, GraphStream, PaddedBatch,
    StaticBatcher, StaticMode,
};
pub use compile_sim::{CostModel, ShapeKey, ShapeRegistry};
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{batch_graphs, graph_size, unbatch, Graph, GraphBatch, SizeTriple};
pub use padding::{
    make_dummy_graph, next_multiple_of_64, next_power_of_two, pad_nearest_multiple_of_64,
    pad_nearest_power_of_two, pad_to_target, PaddingBudget,
};
