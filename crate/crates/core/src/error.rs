use thiserror::Error;

use crate::qsim::GateTag;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count out of range: {0} (supported 1..=8)")]
    QubitCount(usize),

    #[error("{tag} takes {expected} parameter(s), got {got}")]
    Arity {
        tag: GateTag,
        expected: usize,
        got: usize,
    },

    #[error("qubit index {index} is out of range for a {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("control and target are both qubit {0}")]
    IndexCollision(usize),

    #[error("gate {tag} {}", if *.controlled { "requires a control qubit" } else { "does not take a control qubit" })]
    ControlMismatch { tag: GateTag, controlled: bool },

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Ingest {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint {field}: {message}")]
    Checkpoint { field: String, message: String },

    #[error("confusion matrix is empty")]
    EmptyConfusionMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
