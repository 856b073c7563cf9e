//! Generation, serialization, splitting and scoring of graph
//! instruction-tuning benchmarks over heterogeneous networks.
//!
//! The pipeline runs source records through [`ingest`] into a
//! [`HeteroGraph`], samples ego subgraphs with [`sampler`], answers the
//! structural questions with [`tasks`], renders contexts with
//! [`serialize`], assembles corpora in [`dataset`] and scores model
//! output in [`eval`].

pub mod answer;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod rng;
pub mod sampler;
pub mod serialize;
pub mod tasks;
pub mod tokens;

pub use answer::{Answer, AnswerType, Pair, Path};
pub use error::{Error, Result};
pub use graph::{EdgeRecord, HeteroGraph, NodeRef};
pub use sampler::{DownsamplePolicy, SampleConfig};
pub use serialize::{Format, GraphText};
pub use tasks::{TaskKind, TaskSpec};
pub use tokens::TokenEstimator;
