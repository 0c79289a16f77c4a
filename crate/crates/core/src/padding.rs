//! Padding targets and dummy graphs.
//!
//! Every padding routine appends dummy graphs so that the member list hits an
//! exact target shape. The first dummy carries all missing nodes and edges
//! (edges are self-loops on its node 0); any further dummies are empty and
//! only fill graph slots.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Features, Graph, SizeTriple};

/// Fixed `(nodes, edges, graphs)` shape that a padded batch must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PaddingBudget {
    node_target: usize,
    edge_target: usize,
    graph_target: usize,
}

impl PaddingBudget {
    pub fn new(node_target: usize, edge_target: usize, graph_target: usize) -> Result<Self> {
        if node_target < 1 {
            return Err(Error::InvalidBudget("node target must be at least 1".into()));
        }
        if graph_target < 2 {
            return Err(Error::InvalidBudget(format!(
                "graph target {graph_target} leaves no slot for a real graph and the dummy graph"
            )));
        }
        Ok(PaddingBudget {
            node_target,
            edge_target,
            graph_target,
        })
    }

    pub fn node_target(&self) -> usize {
        self.node_target
    }

    pub fn edge_target(&self) -> usize {
        self.edge_target
    }

    pub fn graph_target(&self) -> usize {
        self.graph_target
    }

    pub fn as_size(&self) -> SizeTriple {
        SizeTriple::new(self.node_target, self.edge_target, self.graph_target)
    }

    /// Largest pre-pad size a batch may reach: one graph slot is kept for the
    /// dummy graph.
    pub fn real_capacity(&self) -> SizeTriple {
        SizeTriple::new(self.node_target, self.edge_target, self.graph_target - 1)
    }

    /// Capacity used when filling a batch graph by graph: besides the graph
    /// slot, one node is kept so the dummy graph can always host padding
    /// edges.
    pub fn dynamic_capacity(&self) -> SizeTriple {
        SizeTriple::new(self.node_target - 1, self.edge_target, self.graph_target - 1)
    }
}

impl fmt::Display for PaddingBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_size().fmt(f)
    }
}

/// Smallest power of two `>= s`. Zero has no bucket.
pub fn next_power_of_two(s: usize) -> Result<usize> {
    if s == 0 {
        return Err(Error::DomainError(
            "next power of two is undefined for 0".into(),
        ));
    }
    s.checked_next_power_of_two()
        .ok_or_else(|| Error::DomainError(format!("{s} has no representable power of two")))
}

/// Smallest multiple of 64 `>= max(s, 1)`.
pub fn next_multiple_of_64(s: usize) -> usize {
    s.max(1).next_multiple_of(64)
}

/// A dummy graph of `pad_nodes` nodes whose `pad_edges` edges are all
/// self-loops on node 0.
pub fn make_dummy_graph(pad_nodes: usize, pad_edges: usize) -> Result<Graph> {
    dummy_graph(pad_nodes, pad_edges, FeatureLayout::default())
}

/// Feature dimensions shared by a list of graphs. A dimension is present only
/// when every graph carries that kind of feature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct FeatureLayout {
    node_dim: Option<usize>,
    edge_dim: Option<usize>,
}

impl FeatureLayout {
    fn of(graphs: &[Graph]) -> Self {
        fn dim<'a>(mut parts: impl Iterator<Item = Option<&'a Features>>) -> Option<usize> {
            let mut found = None;
            for p in parts.by_ref() {
                let p = p?;
                if found.is_none() {
                    found = p.first().map(Vec::len);
                }
            }
            Some(found.unwrap_or(1))
        }
        if graphs.is_empty() {
            return Self::default();
        }
        FeatureLayout {
            node_dim: dim(graphs.iter().map(Graph::node_features)),
            edge_dim: dim(graphs.iter().map(Graph::edge_features)),
        }
    }
}

fn dummy_graph(pad_nodes: usize, pad_edges: usize, layout: FeatureLayout) -> Result<Graph> {
    if pad_nodes == 0 && pad_edges > 0 {
        return Err(Error::InvalidDummy { pad_edges });
    }
    let zeros = |count: usize, dim: Option<usize>| dim.map(|d| vec![vec![0.0; d]; count]);
    Ok(Graph::from_parts_unchecked(
        pad_nodes,
        vec![0; pad_edges],
        vec![0; pad_edges],
        zeros(pad_nodes, layout.node_dim),
        zeros(pad_edges, layout.edge_dim),
    ))
}

/// Appends dummy graphs so that node, edge and graph totals equal `budget`
/// exactly.
pub fn pad_to_target(mut graphs: Vec<Graph>, budget: &PaddingBudget) -> Result<Vec<Graph>> {
    let size = SizeTriple::sum_of(&graphs);
    if !size.fits_within(&budget.real_capacity()) {
        return Err(Error::BudgetExceeded {
            size,
            budget: *budget,
        });
    }
    let layout = FeatureLayout::of(&graphs);
    graphs.push(dummy_graph(
        budget.node_target - size.nodes,
        budget.edge_target - size.edges,
        layout,
    )?);
    let empty = dummy_graph(0, 0, layout)?;
    graphs.resize(budget.graph_target, empty);
    Ok(graphs)
}

/// Pads node and edge totals up to the next power of two with one dummy graph.
/// An edge total of zero stays zero. If the node total is already a power of
/// two while edges still need padding, nodes go up to the following power.
pub fn pad_nearest_power_of_two(graphs: Vec<Graph>) -> Result<Vec<Graph>> {
    pad_with(graphs, next_power_of_two)
}

/// Pads node and edge totals up to the next multiple of 64 with one dummy
/// graph. An edge total of zero stays zero; an exact node multiple moves up by
/// 64 when edges still need padding.
pub fn pad_nearest_multiple_of_64(graphs: Vec<Graph>) -> Result<Vec<Graph>> {
    pad_with(graphs, |s| Ok(next_multiple_of_64(s)))
}

fn pad_with(
    mut graphs: Vec<Graph>,
    round: impl Fn(usize) -> Result<usize>,
) -> Result<Vec<Graph>> {
    if graphs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let size = SizeTriple::sum_of(&graphs);
    if size.nodes == 0 {
        return Err(Error::DomainError("cannot pad a batch with no nodes".into()));
    }
    let edge_target = if size.edges == 0 { 0 } else { round(size.edges)? };
    let mut node_target = round(size.nodes)?;
    if node_target == size.nodes && edge_target > size.edges {
        // padding edges need a dummy node to attach to: move up one bucket
        node_target = round(size.nodes + 1)?;
    }
    let layout = FeatureLayout::of(&graphs);
    graphs.push(dummy_graph(
        node_target - size.nodes,
        edge_target - size.edges,
        layout,
    )?);
    Ok(graphs)
}
