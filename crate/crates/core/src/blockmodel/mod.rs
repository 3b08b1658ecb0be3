//! Hierarchical block model over the layered graph and its description
//! length objective.

mod objective;
mod partition;
mod query;
mod state;

use thiserror::Error;

pub use objective::{description_length, ObjectiveValue, Term};
pub use partition::{ExpandedPartition, HierarchicalPartition, Level, NodeOrder};
pub use query::{doc_cluster_of, doc_cluster_prob, doc_cluster_probs, word_cluster_of};
pub use state::{apply_partition_move, delta_dl, LevelState, Target};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockModelError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid move: {0}")]
    InvalidMove(String),
    #[error("level {level} out of range (depth {depth})")]
    InvalidLevel { level: usize, depth: usize },
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("unknown {kind} {id}")]
    NotFound { kind: &'static str, id: String },
}
