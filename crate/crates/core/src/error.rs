use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} is not in the graph")]
    UnknownNode(String),

    #[error("edge type `{0}` is not declared in the graph")]
    UnknownEdgeType(String),

    #[error("node type `{0}` is not declared in the graph")]
    UnknownNodeType(String),

    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),

    #[error("self-loop on {0}")]
    SelfLoop(String),

    #[error("raw id `{raw_id}` declared as both `{first}` and `{second}`")]
    ConflictingNodeType {
        raw_id: String,
        first: String,
        second: String,
    },

    #[error("malformed source record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("invalid task spec for {task}: {reason}")]
    InvalidSpec { task: String, reason: String },

    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(String),

    #[error("seed set is empty")]
    EmptySeeds,

    #[error("edge type `{edge_type}` has {available} edges, {requested} positives requested")]
    InsufficientPositives {
        edge_type: String,
        available: usize,
        requested: usize,
    },

    #[error("could not draw {requested} negative `{edge_type}` pairs (found {found})")]
    NegativeSamplingExhausted {
        edge_type: String,
        requested: usize,
        found: usize,
    },

    #[error("sub-task `{sub_task}` exhausted its attempt budget ({accepted}/{requested} accepted after {attempts} attempts)")]
    GenerationExhausted {
        sub_task: String,
        accepted: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate instance ids in predictions: {0:?}")]
    DuplicatePredictions(Vec<String>),

    #[error("prediction for unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("malformed graph text: {0}")]
    GraphText(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, record {index}: {reason}")]
    Record {
        path: PathBuf,
        index: usize,
        reason: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn spec(task: impl std::fmt::Display, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            task: task.to_string(),
            reason: reason.into(),
        }
    }
}
