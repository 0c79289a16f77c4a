use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::graph::SizeTriple;
use crate::padding::PaddingBudget;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for a graph with {num_nodes} nodes")]
    IndexOutOfRange { index: u32, num_nodes: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("cannot batch an empty list of graphs")]
    EmptyBatch,

    #[error("corrupt batch: {0}")]
    CorruptBatch(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("a dummy graph with {pad_edges} edges needs at least one node")]
    InvalidDummy { pad_edges: usize },

    #[error("invalid padding budget: {0}")]
    InvalidBudget(String),

    #[error("batch of size {size} does not fit padding budget {budget}")]
    BudgetExceeded { size: SizeTriple, budget: PaddingBudget },

    /// A single graph is larger than the budget. Fatal for dynamic batching:
    /// the run must be restarted with a larger budget.
    #[error(
        "graph with {nodes} nodes and {edges} edges exceeds padding budget {budget}; \
         restart with a larger budget"
    )]
    GraphExceedsBudget {
        nodes: usize,
        edges: usize,
        budget: PaddingBudget,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("step {step} is not after the last recorded step {last}")]
    OutOfOrderStep { step: usize, last: usize },

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no input values")]
    EmptyInput,

    #[error("division by zero")]
    DivisionByZero,

    #[error("t statistic undefined: both samples have zero variance and equal means")]
    DegenerateSamples,

    #[error("invalid histogram bin width {0}")]
    InvalidBinWidth(f64),

    #[error("reports are not comparable: {0}")]
    MismatchedConfigs(String),

    #[error("report has no quantity `{0}`")]
    MissingQuantity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
