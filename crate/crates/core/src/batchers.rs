//! Static and dynamic batching over an endlessly cycling graph stream.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compile_sim::ShapeKey;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBatch, SizeTriple};
use crate::padding::{
    next_multiple_of_64, pad_nearest_multiple_of_64, pad_nearest_power_of_two, pad_to_target,
    PaddingBudget,
};

/// Default number of stream items inspected when estimating a budget.
pub const DEFAULT_BUDGET_SAMPLE_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[serde(rename = "static64")]
    Static64,
    #[serde(rename = "static2n")]
    Static2N,
    StaticConstant,
    Dynamic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Static64,
        Algorithm::Static2N,
        Algorithm::StaticConstant,
        Algorithm::Dynamic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Static64 => "static64",
            Algorithm::Static2N => "static2n",
            Algorithm::StaticConstant => "static-constant",
            Algorithm::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Multiplier applied to the largest graph when computing a static-constant
/// budget: the full batch size, or batch size minus the dummy slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantFactor {
    Full,
    #[default]
    MinusOne,
}

impl ConstantFactor {
    fn multiplier(self, batch_size: usize) -> usize {
        match self {
            ConstantFactor::Full => batch_size,
            ConstantFactor::MinusOne => batch_size - 1,
        }
    }
}

/// One padded batch as handed to the update step.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub batch: GraphBatch,
    pub shape: ShapeKey,
    pub algorithm: Algorithm,
    pub step_index: usize,
}

impl PaddedBatch {
    fn new(batch: GraphBatch, algorithm: Algorithm, step_index: usize) -> Self {
        let shape = ShapeKey::from(batch.padded_size());
        PaddedBatch {
            batch,
            shape,
            algorithm,
            step_index,
        }
    }
}

/// Infinite stream that walks a dataset in a fresh seeded permutation each
/// epoch. Cloning a stream snapshots its position.
#[derive(Debug, Clone)]
pub struct GraphStream {
    dataset: Arc<Vec<Graph>>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
    position: usize,
}

impl GraphStream {
    pub fn new(dataset: Arc<Vec<Graph>>, seed: u64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let order = (0..dataset.len()).collect();
        let mut stream = GraphStream {
            dataset,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order,
            cursor: 0,
            epoch: 0,
            position: 0,
        };
        stream.order.shuffle(&mut stream.rng);
        Ok(stream)
    }

    pub fn dataset(&self) -> &Arc<Vec<Graph>> {
        &self.dataset
    }

    /// Zero-based epoch of the next item.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Number of items yielded so far.
    pub fn position(&self) -> usize {
        self.position
    }

    fn next_graph(&mut self) -> &Graph {
        if self.cursor == self.order.len() {
            self.order.sort_unstable();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let index = self.order[self.cursor];
        self.cursor += 1;
        self.position += 1;
        &self.dataset[index]
    }
}

impl Iterator for GraphStream {
    type Item = Graph;

    fn next(&mut self) -> Option<Graph> {
        Some(self.next_graph().clone())
    }
}

/// Seeded endless stream over `dataset`.
pub fn cycle_shuffle_stream(dataset: Vec<Graph>, seed: u64) -> Result<GraphStream> {
    GraphStream::new(Arc::new(dataset), seed)
}

/// Padding budget from the mean graph size of the next `sample_size` items of
/// `stream`, scaled by the batch size and rounded up to multiples of 64. The
/// stream itself is not advanced.
pub fn estimate_padding_budget(
    stream: &GraphStream,
    batch_size: usize,
    sample_size: usize,
) -> Result<PaddingBudget> {
    if batch_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch_size} must be at least 2"
        )));
    }
    if sample_size < 1 {
        return Err(Error::InvalidConfig("budget sample size must be at least 1".into()));
    }
    let mut sample = stream.clone();
    let mut total = SizeTriple::default();
    for _ in 0..sample_size {
        total += sample.next_graph().size();
    }
    let scaled = |sum: usize| (sum * batch_size).div_ceil(sample_size);
    PaddingBudget::new(
        next_multiple_of_64(scaled(total.nodes)),
        next_multiple_of_64(scaled(total.edges)),
        batch_size,
    )
}

/// Static-constant budget: the largest node count and the largest edge count
/// in the dataset, multiplied per `factor` and rounded up to the next multiple
/// of 64 strictly above the product, which keeps at least one node free for
/// the dummy graph.
pub fn scan_max_budget(
    dataset: &[Graph],
    batch_size: usize,
    factor: ConstantFactor,
) -> Result<PaddingBudget> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch_size} must be at least 2"
        )));
    }
    let max_nodes = dataset.iter().map(Graph::num_nodes).max().unwrap_or(0);
    let max_edges = dataset.iter().map(Graph::num_edges).max().unwrap_or(0);
    let m = factor.multiplier(batch_size);
    PaddingBudget::new(
        next_multiple_of_64(max_nodes * m + 1),
        next_multiple_of_64(max_edges * m + 1),
        batch_size,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticMode {
    PowerOfTwo,
    MultipleOf64,
    Constant(PaddingBudget),
}

impl StaticMode {
    fn algorithm(&self) -> Algorithm {
        match self {
            StaticMode::PowerOfTwo => Algorithm::Static2N,
            StaticMode::MultipleOf64 => Algorithm::Static64,
            StaticMode::Constant(_) => Algorithm::StaticConstant,
        }
    }
}

/// Takes exactly `batch_size - 1` graphs per step and pads according to the
/// mode.
#[derive(Debug, Clone)]
pub struct StaticBatcher {
    stream: GraphStream,
    batch_size: usize,
    mode: StaticMode,
    step: usize,
    failed: bool,
}

impl StaticBatcher {
    pub fn new(stream: GraphStream, batch_size: usize, mode: StaticMode) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch size {batch_size} must be at least 2"
            )));
        }
        if let StaticMode::Constant(budget) = mode {
            if budget.graph_target() != batch_size {
                return Err(Error::InvalidConfig(format!(
                    "constant budget graph target {} differs from batch size {batch_size}",
                    budget.graph_target()
                )));
            }
        }
        Ok(StaticBatcher {
            stream,
            batch_size,
            mode,
            step: 0,
            failed: false,
        })
    }

    fn assemble(&mut self) -> Result<PaddedBatch> {
        let real = self.batch_size - 1;
        let graphs: Vec<Graph> = self.stream.by_ref().take(real).collect();
        let padded = match &self.mode {
            StaticMode::PowerOfTwo => pad_nearest_power_of_two(graphs)?,
            StaticMode::MultipleOf64 => pad_nearest_multiple_of_64(graphs)?,
            StaticMode::Constant(budget) => pad_to_target(graphs, budget)?,
        };
        let batch = GraphBatch::from_padded(padded, real)?;
        Ok(PaddedBatch::new(batch, self.mode.algorithm(), self.step))
    }
}

impl Iterator for StaticBatcher {
    type Item = Result<PaddedBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let out = self.assemble();
        self.failed = out.is_err();
        self.step += 1;
        Some(out)
    }
}

pub fn static_batcher(
    stream: GraphStream,
    batch_size: usize,
    mode: StaticMode,
) -> Result<StaticBatcher> {
    StaticBatcher::new(stream, batch_size, mode)
}

/// Fills each batch one graph at a time until the next graph would overflow
/// the budget, then pads to the budget exactly. The overflowing graph opens
/// the following batch.
///
/// One node and one graph slot of the budget are kept for the dummy graph, so
/// real graphs never fill more than `node_target - 1` nodes.
#[derive(Debug, Clone)]
pub struct DynamicBatcher {
    stream: GraphStream,
    budget: PaddingBudget,
    pending: Option<Graph>,
    step: usize,
    failed: bool,
}

impl DynamicBatcher {
    pub fn new(stream: GraphStream, budget: PaddingBudget) -> Self {
        DynamicBatcher {
            stream,
            budget,
            pending: None,
            step: 0,
            failed: false,
        }
    }

    pub fn budget(&self) -> &PaddingBudget {
        &self.budget
    }

    fn assemble(&mut self) -> Result<PaddedBatch> {
        let capacity = self.budget.dynamic_capacity();
        let mut graphs = Vec::with_capacity(capacity.graphs);
        let mut size = SizeTriple::default();
        loop {
            let g = match self.pending.take() {
                Some(g) => g,
                None => self.stream.next_graph().clone(),
            };
            let s = g.size();
            if s.nodes > capacity.nodes || s.edges > capacity.edges {
                return Err(Error::GraphExceedsBudget {
                    nodes: s.nodes,
                    edges: s.edges,
                    budget: self.budget,
                });
            }
            if !(size + s).fits_within(&capacity) {
                self.pending = Some(g);
                break;
            }
            size += s;
            graphs.push(g);
        }
        let real = graphs.len();
        let padded = pad_to_target(graphs, &self.budget)?;
        let batch = GraphBatch::from_padded(padded, real)?;
        Ok(PaddedBatch::new(batch, Algorithm::Dynamic, self.step))
    }
}

impl Iterator for DynamicBatcher {
    type Item = Result<PaddedBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let out = self.assemble();
        self.failed = out.is_err();
        self.step += 1;
        Some(out)
    }
}

pub fn dynamic_batcher(stream: GraphStream, budget: PaddingBudget) -> DynamicBatcher {
    DynamicBatcher::new(stream, budget)
}

/// Any of the four batchers behind one iterator type.
#[derive(Debug, Clone)]
pub enum Batcher {
    Static(StaticBatcher),
    Dynamic(DynamicBatcher),
}

impl Batcher {
    /// Builds the batcher for `algorithm`. The dynamic budget is estimated
    /// from the stream prefix; the static-constant budget is scanned from the
    /// whole dataset.
    pub fn for_algorithm(
        algorithm: Algorithm,
        stream: GraphStream,
        batch_size: usize,
        budget_sample_size: usize,
        constant_factor: ConstantFactor,
    ) -> Result<Self> {
        Ok(match algorithm {
            Algorithm::Static64 => {
                Batcher::Static(StaticBatcher::new(stream, batch_size, StaticMode::MultipleOf64)?)
            }
            Algorithm::Static2N => {
                Batcher::Static(StaticBatcher::new(stream, batch_size, StaticMode::PowerOfTwo)?)
            }
            Algorithm::StaticConstant => {
                let budget = scan_max_budget(stream.dataset(), batch_size, constant_factor)?;
                Batcher::Static(StaticBatcher::new(
                    stream,
                    batch_size,
                    StaticMode::Constant(budget),
                )?)
            }
            Algorithm::Dynamic => {
                let budget = estimate_padding_budget(&stream, batch_size, budget_sample_size)?;
                Batcher::Dynamic(DynamicBatcher::new(stream, budget))
            }
        })
    }

    /// The fixed budget in effect, if the algorithm uses one.
    pub fn budget(&self) -> Option<PaddingBudget> {
        match self {
            Batcher::Static(b) => match b.mode {
                StaticMode::Constant(budget) => Some(budget),
                _ => None,
            },
            Batcher::Dynamic(b) => Some(b.budget),
        }
    }
}

impl Iterator for Batcher {
    type Item = Result<PaddedBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Batcher::Static(b) => b.next(),
            Batcher::Dynamic(b) => b.next(),
        }
    }
}
