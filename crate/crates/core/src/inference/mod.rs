//! Fitting hierarchical partitions, model snapshots and update jobs.

mod fit;
mod jobs;
mod snapshot;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::multinet::NetworkConfig;

pub use fit::{
    accept_move, agglomerate, agglomerate_step, fit_graph, fit_hierarchy, fit_level, fit_restart,
    restart_rng, sweep, temperature, FitResult, Progress,
};
pub use jobs::{JobBoard, JobError, JobState, UpdateJob};
pub use snapshot::{build_snapshot, ModelSnapshot, SnapshotError, SnapshotSummary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub seed: u64,
    pub restarts: usize,
    pub sweeps: usize,
    pub initial_temperature: f64,
    /// Candidate merges sampled per agglomeration step.
    pub merge_candidates: usize,
    pub max_levels: usize,
    pub omega: u64,
    pub include_non_keyword: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            seed: 0,
            restarts: 5,
            sweeps: 100,
            initial_temperature: 1.0,
            merge_candidates: 20,
            max_levels: 5,
            omega: 1,
            include_non_keyword: true,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.restarts == 0 {
            return Err("restarts must be at least 1".into());
        }
        if self.max_levels == 0 {
            return Err("levels must be at least 1".into());
        }
        if self.merge_candidates == 0 {
            return Err("merge candidates must be at least 1".into());
        }
        if self.omega == 0 {
            return Err("omega must be at least 1".into());
        }
        if !self.initial_temperature.is_finite() || self.initial_temperature < 0.0 {
            return Err("initial temperature must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            omega: self.omega,
            include_non_keyword: self.include_non_keyword,
        }
    }

    /// SHA-256 of the config's JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
