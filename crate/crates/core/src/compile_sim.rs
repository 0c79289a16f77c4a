//! Shape-cache model of a JIT-compiled update step.
//!
//! Every distinct padded shape costs one compilation; the update step itself
//! is charged by a linear cost model.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SizeTriple;

/// Padded `(nodes, edges, graphs)` shape identifying one compiled kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapeKey {
    pub padded_nodes: usize,
    pub padded_edges: usize,
    pub num_graphs: usize,
}

impl ShapeKey {
    pub const fn new(padded_nodes: usize, padded_edges: usize, num_graphs: usize) -> Self {
        ShapeKey {
            padded_nodes,
            padded_edges,
            num_graphs,
        }
    }
}

impl From<SizeTriple> for ShapeKey {
    fn from(s: SizeTriple) -> Self {
        ShapeKey::new(s.nodes, s.edges, s.graphs)
    }
}

impl fmt::Display for ShapeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.padded_nodes, self.padded_edges, self.num_graphs
        )
    }
}

/// First occurrence of a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileEvent {
    pub step_index: usize,
    pub shape: ShapeKey,
}

/// Shapes observed during one run, with the step at which each first appeared.
#[derive(Debug, Clone, Default)]
pub struct ShapeRegistry {
    seen: HashSet<ShapeKey>,
    events: Vec<CompileEvent>,
    last_step: Option<usize>,
}

impl ShapeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the shape used at `step`; returns true when it triggers a
    /// compilation. Steps must be strictly increasing.
    pub fn record_step(&mut self, step: usize, shape: ShapeKey) -> Result<bool> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(Error::OutOfOrderStep { step, last });
            }
        }
        self.last_step = Some(step);
        let is_new = self.seen.insert(shape);
        if is_new {
            self.events.push(CompileEvent {
                step_index: step,
                shape,
            });
        }
        Ok(is_new)
    }

    pub fn distinct_shapes(&self) -> usize {
        self.seen.len()
    }

    /// Compilations after the first one.
    pub fn recompilation_count(&self) -> usize {
        self.seen.len().saturating_sub(1)
    }

    pub fn events(&self) -> &[CompileEvent] {
        &self.events
    }

    /// Writes `step_index,padded_nodes,padded_edges,num_graphs` rows.
    pub fn write_events_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step_index,padded_nodes,padded_edges,num_graphs")?;
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{}",
                e.step_index, e.shape.padded_nodes, e.shape.padded_edges, e.shape.num_graphs
            )?;
        }
        Ok(())
    }
}

pub fn record_step(registry: &mut ShapeRegistry, step: usize, shape: ShapeKey) -> Result<bool> {
    registry.record_step(step, shape)
}

pub fn recompilation_count(registry: &ShapeRegistry) -> usize {
    registry.recompilation_count()
}

/// Linear cost of one update step, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub base_cost: f64,
    pub node_cost: f64,
    pub edge_cost: f64,
    pub compile_penalty: f64,
}

impl CostModel {
    pub fn new(base_cost: f64, node_cost: f64, edge_cost: f64, compile_penalty: f64) -> Result<Self> {
        let model = CostModel {
            base_cost,
            node_cost,
            edge_cost,
            compile_penalty,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let coefficients = [
            self.base_cost,
            self.node_cost,
            self.edge_cost,
            self.compile_penalty,
        ];
        if coefficients.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "cost coefficients must be finite and non-negative: {coefficients:?}"
            )))
        }
    }

    pub fn update_cost(&self, shape: &ShapeKey, is_new_shape: bool) -> f64 {
        let compile = if is_new_shape { self.compile_penalty } else { 0.0 };
        self.base_cost
            + self.node_cost * shape.padded_nodes as f64
            + self.edge_cost * shape.padded_edges as f64
            + compile
    }
}

pub fn simulate_update_cost(shape: &ShapeKey, model: &CostModel, is_new_shape: bool) -> f64 {
    model.update_cost(shape, is_new_shape)
}
