//! Error types shared across the crate.

use thiserror::Error;

/// Top-level error type.
///
/// Variants split into two broad classes: bad input (rejected data, invalid
/// arguments) and run failures (transport or protocol faults inside the
/// distributed engine). The CLI maps the first class to exit code 1 and the
/// second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pair ({i}, {j}) for {n} items; require 0 <= i < j < n")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("flat offset {offset} out of range for {n} items")]
    OffsetOutOfRange { offset: usize, n: usize },

    #[error("distance for pair ({i}, {j}) is {value}; distances must be finite and non-negative")]
    InvalidDistance { i: usize, j: usize, value: f64 },

    #[error("condensed matrix has {got} cells; {n} items require exactly {expected}")]
    CellCountMismatch { got: usize, expected: usize, n: usize },

    #[error("{got} cells is not a triangular number (n*(n-1)/2); cannot infer item count")]
    NotTriangular { got: usize },

    #[error("matrix cell ({i}, {j}) = {upper} does not match its mirror ({j}, {i}) = {lower} within {tolerance}")]
    AsymmetricCell { i: usize, j: usize, upper: f64, lower: f64, tolerance: f64 },

    #[error("diagonal cell ({i}, {i}) = {value}; the diagonal of a distance matrix must be zero")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("matrix row {row} has {got} columns; expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },

    #[error("cluster sizes must be at least 1")]
    ZeroClusterSize,

    #[error("cluster count {k} out of range; require 1 <= k <= {n}")]
    ClusterCountOutOfRange { k: usize, n: usize },

    #[error("worker count must be at least 1")]
    NoWorkers,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid merge list at row {row}: {message}")]
    InvalidMergeList { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Transport(#[from] TransportError),

    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl Error {
    /// True for failures inside a clustering run (as opposed to bad input).
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Protocol(_))
    }
}

/// Failures of the message-passing layer itself.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("transport closed: {0}")]
    Closed(String),

    #[error("rank {rank} out of range for {workers} workers")]
    BadRank { rank: usize, workers: usize },

    /// Receiving on a rank whose inbox is empty while every peer has already
    /// finished: no message can ever arrive, so the protocol state is corrupt.
    #[error("rank {rank} is waiting for a message that can never arrive (all peers finished)")]
    NoFutureMessage { rank: usize },
}

/// Violations of the iteration protocol detected by a worker.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("iteration {iteration}: no alive cells reported by any worker, but merges remain")]
    NoAliveCells { iteration: usize },

    #[error(
        "iteration {iteration}: combine announcement ({got_i}, {got_j}) at {got_distance} \
         does not match the local reduction ({want_i}, {want_j}) at {want_distance}"
    )]
    CombineMismatch {
        iteration: usize,
        got_i: usize,
        got_j: usize,
        got_distance: f64,
        want_i: usize,
        want_j: usize,
        want_distance: f64,
    },

    #[error("iteration {iteration}: no triple received for partner {partner} of retired row {retired}")]
    MissingTriple { iteration: usize, partner: usize, retired: usize },

    #[error("iteration {iteration}: rank {rank} received unexpected message: {message}")]
    UnexpectedMessage { iteration: usize, rank: usize, message: String },

    #[error("workers stalled with no deliverable messages (earliest incomplete iteration {iteration})")]
    Stalled { iteration: usize },
}
