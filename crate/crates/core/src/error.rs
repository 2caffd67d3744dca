use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Address;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: label {label:?} is not in the label set of dataset {dataset}")]
    LabelOutsideManifest { line: usize, dataset: String, label: String },

    #[error("duplicate utterance {conv_id}#{index}")]
    DuplicateUtterance { conv_id: String, index: usize },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("unknown label {label:?} for dataset {dataset}")]
    UnknownLabel { dataset: String, label: String },

    #[error("{address}: {source}")]
    AtUtterance {
        address: Address,
        #[source]
        source: Box<Error>,
    },

    #[error("duplicate speaker {speaker:?} in dataset {dataset}")]
    DuplicateSpeaker { dataset: String, speaker: String },

    #[error("unknown speaker {speaker:?} in dataset {dataset}")]
    UnknownSpeaker { dataset: String, speaker: String },

    #[error("mapping table: {0}")]
    MappingTable(String),

    #[error("label {0:?} has no training utterances")]
    EmptyClass(String),

    #[error("no admissible demonstration for {0}")]
    EmptyAdmissibleSet(String),

    #[error("no vector for id {0:?}")]
    MissingVector(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("transport: {0}")]
    Transport(String),

    #[error("length mismatch: {gold} gold labels vs {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("generation aborted after {completed} of {total} samples: {source}")]
    Aborted {
        completed: usize,
        total: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at(address: &Address, source: Error) -> Self {
        Error::AtUtterance { address: address.clone(), source: Box::new(source) }
    }
}
