use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fit::{fit_graph, Progress};
use super::InferenceConfig;
use crate::annotations::AnnotationStore;
use crate::blockmodel::{BlockModelError, ExpandedPartition, NodeOrder};
use crate::corpus::Corpus;
use crate::multinet::{build_network, contract_atoms, NetworkError};
use crate::project::write_atomic;
use crate::Objective;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("invalid inference config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    BlockModel(#[from] BlockModelError),
    #[error("snapshot storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corpus has no tokens to model")]
    EmptyCorpus,
}

/// A fitted model, frozen with the inputs it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub snapshot_id: u64,
    pub created_at: String,
    pub annotation_version: u64,
    pub objective: Objective,
    #[serde(flatten)]
    pub partition: ExpandedPartition,
    pub duration_s: f64,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub snapshot_id: u64,
    pub created_at: String,
    pub annotation_version: u64,
    pub total: f64,
    pub depth: usize,
    /// Blocks per kind (words, docs, codes, categories) at each level.
    pub block_counts: Vec<[usize; 4]>,
    pub duration_s: f64,
}

impl ModelSnapshot {
    pub fn depth(&self) -> usize {
        self.partition.depth()
    }

    pub fn node_order(&self) -> &NodeOrder {
        &self.partition.node_order
    }

    pub fn summary(&self) -> SnapshotSummary {
        SnapshotSummary {
            snapshot_id: self.snapshot_id,
            created_at: self.created_at.clone(),
            annotation_version: self.annotation_version,
            total: self.objective.total,
            depth: self.depth(),
            block_counts: (0..self.depth())
                .map(|l| self.partition.block_counts(l).expect("level in range"))
                .collect(),
            duration_s: self.duration_s,
        }
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("snapshot serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn file_name(id: u64) -> String {
        format!("{id}.json")
    }

    /// Writes `<dir>/<id>.json` atomically and returns the path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, SnapshotError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(Self::file_name(self.snapshot_id));
        write_atomic(&path, self.canonical_json().as_bytes())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Builds the network for the given annotations, fits it and expands the
/// result back to original word ids.
pub fn build_snapshot(
    corpus: &Corpus,
    annotations: &AnnotationStore,
    config: &InferenceConfig,
    snapshot_id: u64,
    progress: Option<&Progress>,
) -> Result<ModelSnapshot, SnapshotError> {
    config.validate().map_err(SnapshotError::Config)?;
    let started = Instant::now();
    let network = build_network(corpus, annotations, &config.network())?;
    if network.text_total() == 0 {
        return Err(SnapshotError::EmptyCorpus);
    }
    let contracted = contract_atoms(&network);
    let fit = fit_graph(contracted.graph(), config, progress);
    let node_order = NodeOrder {
        words: corpus.vocabulary().terms().to_vec(),
        docs: network.text().doc_ids().to_vec(),
        codes: network.code_ids().to_vec(),
        categories: network.category_ids().to_vec(),
    };
    let partition = ExpandedPartition::expand(&contracted, &fit.partition, node_order);
    Ok(ModelSnapshot {
        snapshot_id,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        annotation_version: annotations.version,
        objective: fit.objective,
        partition,
        duration_s: started.elapsed().as_secs_f64(),
        config_digest: config.digest(),
    })
}
