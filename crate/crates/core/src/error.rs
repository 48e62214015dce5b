use std::io;

use thiserror::Error;

use crate::graph::NodeId;

/// Errors raised while building or loading a [`ProbGraph`](crate::ProbGraph).
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: explicit weighting requires a probability column")]
    MissingProbability { line: usize },
    #[error("edge {source_node}->{target}: probability {prob} outside (0, 1]")]
    InvalidProbability {
        source_node: u64,
        target: u64,
        prob: f64,
    },
    #[error("node {node}: incoming LT weights sum to {sum}, which exceeds 1")]
    LtWeightExceeded { node: u64, sum: f64 },
    #[error("edge {source_node}->{target} references a node outside 0..{n}")]
    NodeOutOfRange {
        source_node: u64,
        target: u64,
        n: usize,
    },
    #[error("node id {0} is too large for dense ids; load with id compaction")]
    IdTooLarge(u64),
}

/// Errors from the sampling, selection and adaptive layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("seed {0} is already active")]
    SeedAlreadyActive(NodeId),
    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),
    #[error("realization does not match graph: {0}")]
    RealizationMismatch(String),
    #[error("malformed realization file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
