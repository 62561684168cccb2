//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,

    #[error("isolated node under normalization: node {0} has degree 0 and self-loops are disabled")]
    IsolatedNode(usize),

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("backward requires a scalar, got shape {0:?}")]
    NonScalarBackward(Vec<usize>),

    #[error("backward requires a gradient-tracked tensor")]
    UntrackedBackward,

    #[error("no training nodes")]
    NoTrainingNodes,

    #[error("attention over empty set: node {0} has no neighbors")]
    EmptyNeighborhood(usize),

    #[error("non-finite loss at epoch {epoch}: {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("class index {index} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, num_classes: usize },

    #[error("class {0} has no members")]
    UninhabitedClass(usize),

    #[error("class names must be distinct and match the class count")]
    BadClassNames,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("node {id} appears in the label file but not in the edge file")]
    LabelForUnknownNode { id: String },

    #[error("node {id} appears in the edge file but has no label")]
    MissingLabel { id: String },

    #[error("paper id {id} appears in the cites file but not in the content file")]
    UnknownPaperId { id: String },

    #[error("unknown class name {name:?} under the explicit label encoding")]
    UnknownClassName { name: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidTrainFraction(f64),

    #[error("comparison needs >=2 methods")]
    TooFewMethods,

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
