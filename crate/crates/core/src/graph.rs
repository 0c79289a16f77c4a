//! Graphs, size triples and lossless batch assembly.
//!
//! A batch is a single disconnected super-graph: member node lists are
//! concatenated and every member's sender/receiver indices are shifted by the
//! number of nodes that precede it.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-node or per-edge feature payload.
pub type Features = Vec<Vec<f64>>;

/// A directed graph with optional node and edge features.
///
/// Undirected edges are stored as two directed edges. Instances are validated
/// on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    senders: Vec<u32>,
    receivers: Vec<u32>,
    node_features: Option<Features>,
    edge_features: Option<Features>,
}

impl Graph {
    pub fn new(num_nodes: usize, senders: Vec<u32>, receivers: Vec<u32>) -> Result<Self> {
        Self::with_features(num_nodes, senders, receivers, None, None)
    }

    pub fn with_features(
        num_nodes: usize,
        senders: Vec<u32>,
        receivers: Vec<u32>,
        node_features: Option<Features>,
        edge_features: Option<Features>,
    ) -> Result<Self> {
        if senders.len() != receivers.len() {
            return Err(Error::LengthMismatch {
                what: "receivers",
                expected: senders.len(),
                found: receivers.len(),
            });
        }
        if let Some(&index) = senders
            .iter()
            .chain(&receivers)
            .find(|&&i| i as usize >= num_nodes)
        {
            return Err(Error::IndexOutOfRange { index, num_nodes });
        }
        if let Some(nf) = &node_features {
            if nf.len() != num_nodes {
                return Err(Error::LengthMismatch {
                    what: "node features",
                    expected: num_nodes,
                    found: nf.len(),
                });
            }
        }
        if let Some(ef) = &edge_features {
            if ef.len() != senders.len() {
                return Err(Error::LengthMismatch {
                    what: "edge features",
                    expected: senders.len(),
                    found: ef.len(),
                });
            }
        }
        Ok(Graph {
            num_nodes,
            senders,
            receivers,
            node_features,
            edge_features,
        })
    }

    /// A graph with no nodes and no edges.
    pub fn empty() -> Self {
        Graph {
            num_nodes: 0,
            senders: Vec::new(),
            receivers: Vec::new(),
            node_features: None,
            edge_features: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.senders.len()
    }

    pub fn senders(&self) -> &[u32] {
        &self.senders
    }

    pub fn receivers(&self) -> &[u32] {
        &self.receivers
    }

    pub fn node_features(&self) -> Option<&Features> {
        self.node_features.as_ref()
    }

    pub fn edge_features(&self) -> Option<&Features> {
        self.edge_features.as_ref()
    }

    /// `(num_nodes, num_edges, 1)`.
    pub fn size(&self) -> SizeTriple {
        SizeTriple::new(self.num_nodes, self.num_edges(), 1)
    }

    // Construction path for code that already upholds the invariants.
    pub(crate) fn from_parts_unchecked(
        num_nodes: usize,
        senders: Vec<u32>,
        receivers: Vec<u32>,
        node_features: Option<Features>,
        edge_features: Option<Features>,
    ) -> Self {
        debug_assert_eq!(senders.len(), receivers.len());
        Graph {
            num_nodes,
            senders,
            receivers,
            node_features,
            edge_features,
        }
    }
}

/// Node, edge and graph counts of a graph or a group of graphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SizeTriple {
    pub nodes: usize,
    pub edges: usize,
    pub graphs: usize,
}

impl SizeTriple {
    pub const fn new(nodes: usize, edges: usize, graphs: usize) -> Self {
        SizeTriple {
            nodes,
            edges,
            graphs,
        }
    }

    /// Componentwise `self <= limit`.
    pub fn fits_within(&self, limit: &SizeTriple) -> bool {
        self.nodes <= limit.nodes && self.edges <= limit.edges && self.graphs <= limit.graphs
    }

    pub fn sum_of<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> Self {
        graphs.into_iter().map(Graph::size).fold(Self::default(), Add::add)
    }
}

impl Add for SizeTriple {
    type Output = SizeTriple;

    fn add(self, rhs: Self) -> Self {
        SizeTriple::new(
            self.nodes + rhs.nodes,
            self.edges + rhs.edges,
            self.graphs + rhs.graphs,
        )
    }
}

impl AddAssign for SizeTriple {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl fmt::Display for SizeTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.nodes, self.edges, self.graphs)
    }
}

/// Size of one graph: `(nodes, edges, 1)`.
pub fn graph_size(g: &Graph) -> SizeTriple {
    g.size()
}

/// Several graphs merged into one disconnected super-graph.
///
/// The member list holds the real graphs in stream order followed by any
/// dummy graphs added by padding.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    graphs: Vec<Graph>,
    merged: Graph,
    segment_node_counts: Vec<usize>,
    segment_edge_counts: Vec<usize>,
    num_real_graphs: usize,
    pre_pad_size: SizeTriple,
}

impl GraphBatch {
    /// Batches `graphs` where only the first `num_real_graphs` members are
    /// real; the remainder are padding.
    pub fn from_padded(graphs: Vec<Graph>, num_real_graphs: usize) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if num_real_graphs > graphs.len() {
            return Err(Error::CorruptBatch(format!(
                "{num_real_graphs} real graphs claimed for {} members",
                graphs.len()
            )));
        }
        let pre_pad_size = SizeTriple::sum_of(&graphs[..num_real_graphs]);
        let merged = merge(&graphs);
        let segment_node_counts = graphs.iter().map(Graph::num_nodes).collect();
        let segment_edge_counts = graphs.iter().map(Graph::num_edges).collect();
        Ok(GraphBatch {
            graphs,
            merged,
            segment_node_counts,
            segment_edge_counts,
            num_real_graphs,
            pre_pad_size,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn real_graphs(&self) -> &[Graph] {
        &self.graphs[..self.num_real_graphs]
    }

    pub fn merged(&self) -> &Graph {
        &self.merged
    }

    pub fn segment_node_counts(&self) -> &[usize] {
        &self.segment_node_counts
    }

    pub fn segment_edge_counts(&self) -> &[usize] {
        &self.segment_edge_counts
    }

    pub fn num_real_graphs(&self) -> usize {
        self.num_real_graphs
    }

    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn pre_pad_size(&self) -> SizeTriple {
        self.pre_pad_size
    }

    /// Padded totals: merged node and edge counts plus the member count.
    pub fn padded_size(&self) -> SizeTriple {
        SizeTriple::new(
            self.merged.num_nodes(),
            self.merged.num_edges(),
            self.graphs.len(),
        )
    }
}

/// Merges `graphs` into one batch, all of them counted as real.
pub fn batch_graphs(graphs: Vec<Graph>) -> Result<GraphBatch> {
    let n = graphs.len();
    GraphBatch::from_padded(graphs, n)
}

fn merge(graphs: &[Graph]) -> Graph {
    let total = SizeTriple::sum_of(graphs);
    let mut senders = Vec::with_capacity(total.edges);
    let mut receivers = Vec::with_capacity(total.edges);
    let mut offset = 0u32;
    for g in graphs {
        senders.extend(g.senders.iter().map(|&s| s + offset));
        receivers.extend(g.receivers.iter().map(|&r| r + offset));
        offset += g.num_nodes as u32;
    }
    // features survive only when every member carries them
    let node_features = graphs
        .iter()
        .map(|g| g.node_features.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|parts| parts.into_iter().flatten().cloned().collect());
    let edge_features = graphs
        .iter()
        .map(|g| g.edge_features.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|parts| parts.into_iter().flatten().cloned().collect());
    Graph::from_parts_unchecked(total.nodes, senders, receivers, node_features, edge_features)
}

/// Rebuilds the member graphs (real and dummy) from the merged super-graph.
pub fn unbatch(batch: &GraphBatch) -> Result<Vec<Graph>> {
    let merged = &batch.merged;
    let members = batch.segment_node_counts.len();
    if batch.segment_edge_counts.len() != members || batch.graphs.len() != members {
        return Err(Error::CorruptBatch(format!(
            "{} node segments, {} edge segments, {} members",
            members,
            batch.segment_edge_counts.len(),
            batch.graphs.len()
        )));
    }
    let node_total: usize = batch.segment_node_counts.iter().sum();
    let edge_total: usize = batch.segment_edge_counts.iter().sum();
    if node_total != merged.num_nodes() || edge_total != merged.num_edges() {
        return Err(Error::CorruptBatch(format!(
            "segments sum to ({node_total}, {edge_total}) but merged graph has ({}, {})",
            merged.num_nodes(),
            merged.num_edges()
        )));
    }

    let mut out = Vec::with_capacity(members);
    let (mut node_start, mut edge_start) = (0usize, 0usize);
    for (i, (&n, &e)) in batch
        .segment_node_counts
        .iter()
        .zip(&batch.segment_edge_counts)
        .enumerate()
    {
        let offset = node_start as u32;
        let edges = edge_start..edge_start + e;
        let shift = |idx: &u32| -> Result<u32> {
            idx.checked_sub(offset)
                .filter(|&local| (local as usize) < n)
                .ok_or_else(|| {
                    Error::CorruptBatch(format!("edge index {idx} escapes segment {i}"))
                })
        };
        let senders = merged.senders[edges.clone()]
            .iter()
            .map(shift)
            .collect::<Result<Vec<_>>>()?;
        let receivers = merged.receivers[edges.clone()]
            .iter()
            .map(shift)
            .collect::<Result<Vec<_>>>()?;
        let member = &batch.graphs[i];
        let node_features = match &merged.node_features {
            Some(nf) => Some(nf[node_start..node_start + n].to_vec()),
            None => member.node_features.clone(),
        };
        let edge_features = match &merged.edge_features {
            Some(ef) => Some(ef[edges].to_vec()),
            None => member.edge_features.clone(),
        };
        out.push(Graph::from_parts_unchecked(
            n,
            senders,
            receivers,
            node_features,
            edge_features,
        ));
        node_start += n;
        edge_start += e;
    }
    Ok(out)
}
