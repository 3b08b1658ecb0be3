use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fit::Progress;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateJob {
    pub job_id: u64,
    pub state: JobState,
    pub progress: f64,
    pub snapshot_id: Option<u64>,
    /// Annotation version the job was started from.
    pub annotation_version: u64,
    pub error: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JobError {
    #[error("model update {active} is still running")]
    Busy { active: u64 },
    #[error("unknown job {0}")]
    NotFound(u64),
}

#[derive(Debug)]
struct Entry {
    job: UpdateJob,
    progress: Arc<Progress>,
}

/// Bookkeeping for update jobs; at most one is non-terminal at a time.
#[derive(Debug, Default)]
pub struct JobBoard {
    next_id: u64,
    jobs: BTreeMap<u64, Entry>,
    active: Option<u64>,
}

impl JobBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> Option<u64> {
        self.active
    }

    /// Registers a queued job, or fails with `Busy` if one is in flight.
    pub fn start(&mut self, annotation_version: u64) -> Result<(u64, Arc<Progress>), JobError> {
        if let Some(active) = self.active {
            return Err(JobError::Busy { active });
        }
        let id = self.next_id;
        self.next_id += 1;
        let progress = Arc::new(Progress::new());
        self.jobs.insert(
            id,
            Entry {
                job: UpdateJob {
                    job_id: id,
                    state: JobState::Queued,
                    progress: 0.0,
                    snapshot_id: None,
                    annotation_version,
                    error: None,
                },
                progress: progress.clone(),
            },
        );
        self.active = Some(id);
        Ok((id, progress))
    }

    fn entry(&mut self, id: u64) -> Result<&mut Entry, JobError> {
        self.jobs.get_mut(&id).ok_or(JobError::NotFound(id))
    }

    pub fn set_running(&mut self, id: u64) -> Result<(), JobError> {
        self.entry(id)?.job.state = JobState::Running;
        Ok(())
    }

    pub fn finish(&mut self, id: u64, snapshot_id: u64) -> Result<(), JobError> {
        let e = self.entry(id)?;
        e.job.state = JobState::Done;
        e.job.progress = 1.0;
        e.job.snapshot_id = Some(snapshot_id);
        self.release(id);
        Ok(())
    }

    pub fn fail(&mut self, id: u64, message: String) -> Result<(), JobError> {
        let e = self.entry(id)?;
        e.job.state = JobState::Failed;
        e.job.error = Some(message);
        self.release(id);
        Ok(())
    }

    fn release(&mut self, id: u64) {
        if self.active == Some(id) {
            self.active = None;
        }
    }

    /// Current status; reported progress never decreases between polls.
    pub fn status(&mut self, id: u64) -> Result<UpdateJob, JobError> {
        let e = self.entry(id)?;
        if !e.job.state.is_terminal() {
            e.job.progress = e.job.progress.max(e.progress.fraction().min(0.99));
        }
        Ok(e.job.clone())
    }

    pub fn jobs(&self) -> impl Iterator<Item = &UpdateJob> {
        self.jobs.values().map(|e| &e.job)
    }
}
