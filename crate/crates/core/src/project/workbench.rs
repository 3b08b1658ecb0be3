use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{Project, ProjectError};
use crate::annotations::{AnnotationError, AnnotationStore, CodeFilter, Highlight};
use crate::corpus::{Corpus, CorpusStats, Span, StemCandidate};
use crate::inference::{InferenceConfig, JobBoard, ModelSnapshot, SnapshotSummary, UpdateJob};
use crate::layout::{
    layout_documents, pin_overlay, region_boundaries, GosperLayout, Pin, PlacedDoc, Rings,
};
use crate::multinet::TextLayer;
use crate::sampler::{self, RankedDoc, WordTreeNode, DEFAULT_CLUSTER_SAMPLE};

/// A fitted snapshot together with its map layout.
#[derive(Debug)]
pub struct SnapshotEntry {
    pub snapshot: ModelSnapshot,
    pub layout: GosperLayout,
}

impl SnapshotEntry {
    fn new(snapshot: ModelSnapshot) -> Result<Self, ProjectError> {
        let layout = layout_documents(&snapshot.partition)?;
        Ok(SnapshotEntry { snapshot, layout })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapPayload {
    pub snapshot_id: u64,
    pub annotation_version: u64,
    pub order: u32,
    pub depth: usize,
    pub hexes: Vec<PlacedDoc>,
    /// level → cluster id → outline rings.
    pub boundaries: BTreeMap<String, BTreeMap<String, Rings>>,
    pub pins: Vec<Pin>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DocumentView {
    pub id: String,
    pub title: String,
    pub body: String,
    pub body_len: usize,
    pub truncated: bool,
    pub highlights: Vec<Highlight>,
}

/// Shared state of one open project: corpus, annotation store, snapshot
/// history and the update worker.
#[derive(Debug)]
pub struct Workbench {
    project: Project,
    corpus: Arc<Corpus>,
    text: TextLayer,
    config: RwLock<InferenceConfig>,
    annotations: RwLock<AnnotationStore>,
    snapshots: RwLock<BTreeMap<u64, Arc<SnapshotEntry>>>,
    jobs: Mutex<JobBoard>,
}

fn not_found(kind: &'static str, id: impl ToString) -> ProjectError {
    ProjectError::NotFound {
        kind,
        id: id.to_string(),
    }
}

impl Workbench {
    pub fn open(project: Project) -> Result<Arc<Self>, ProjectError> {
        let corpus = project.load_corpus()?;
        let annotations = project.load_annotations()?;
        let mut snapshots = BTreeMap::new();
        for id in project.snapshot_ids()? {
            snapshots.insert(
                id,
                Arc::new(SnapshotEntry::new(project.load_snapshot(id)?)?),
            );
        }
        let text = TextLayer::from_corpus(&corpus);
        let config = project.config().inference.clone();
        Ok(Arc::new(Workbench {
            project,
            corpus: Arc::new(corpus),
            text,
            config: RwLock::new(config),
            annotations: RwLock::new(annotations),
            snapshots: RwLock::new(snapshots),
            jobs: Mutex::new(JobBoard::new()),
        }))
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn text(&self) -> &TextLayer {
        &self.text
    }

    pub fn stats(&self) -> CorpusStats {
        self.corpus.stats().clone()
    }

    pub fn inference_config(&self) -> InferenceConfig {
        self.config.read().unwrap().clone()
    }

    /// Config used by later updates; not written back to the project.
    pub fn set_inference_config(&self, config: InferenceConfig) -> Result<(), ProjectError> {
        config.validate().map_err(ProjectError::Config)?;
        *self.config.write().unwrap() = config;
        Ok(())
    }

    pub fn annotations(&self) -> AnnotationStore {
        self.annotations.read().unwrap().clone()
    }

    pub fn annotation_version(&self) -> u64 {
        self.annotations.read().unwrap().version
    }

    /// Applies a mutation to a copy of the store, persists it, then
    /// publishes it. Returns the result and the new version.
    pub fn mutate<T>(
        &self,
        f: impl FnOnce(&mut AnnotationStore, &Corpus) -> Result<T, AnnotationError>,
    ) -> Result<(T, u64), ProjectError> {
        let mut guard = self.annotations.write().unwrap();
        let mut next = guard.clone();
        let out = f(&mut next, &self.corpus)?;
        next.save(&self.project.annotations_path())?;
        let version = next.version;
        *guard = next;
        Ok((out, version))
    }

    /// Fits snapshot 0 synchronously when the project has none.
    pub fn bootstrap(&self) -> Result<u64, ProjectError> {
        if let Some(id) = self.latest_snapshot_id() {
            return Ok(id);
        }
        let config = self.inference_config();
        let snapshot = self
            .project
            .fit(&self.corpus, &AnnotationStore::new(), &config, None)?;
        let id = snapshot.snapshot_id;
        self.insert_snapshot(snapshot)?;
        Ok(id)
    }

    fn insert_snapshot(&self, snapshot: ModelSnapshot) -> Result<(), ProjectError> {
        let entry = Arc::new(SnapshotEntry::new(snapshot)?);
        self.snapshots
            .write()
            .unwrap()
            .insert(entry.snapshot.snapshot_id, entry);
        Ok(())
    }

    /// Starts a background fit on the current annotations. Only one job may
    /// run at a time.
    pub fn request_update(self: &Arc<Self>) -> Result<UpdateJob, ProjectError> {
        let store = self.annotations();
        let config = self.inference_config();
        let (id, progress) = self.jobs.lock().unwrap().start(store.version)?;
        let wb = Arc::clone(self);
        std::thread::spawn(move || {
            wb.jobs.lock().unwrap().set_running(id).ok();
            let result = wb
                .project
                .fit(&wb.corpus, &store, &config, Some(&progress))
                .and_then(|snapshot| {
                    let sid = snapshot.snapshot_id;
                    wb.insert_snapshot(snapshot)?;
                    Ok(sid)
                });
            let mut jobs = wb.jobs.lock().unwrap();
            match result {
                Ok(sid) => jobs.finish(id, sid).ok(),
                Err(e) => jobs.fail(id, e.to_string()).ok(),
            };
        });
        Ok(self.job_status(id)?)
    }

    pub fn job_status(&self, id: u64) -> Result<UpdateJob, ProjectError> {
        Ok(self.jobs.lock().unwrap().status(id)?)
    }

    pub fn active_job(&self) -> Option<u64> {
        self.jobs.lock().unwrap().active()
    }

    /// Polls until the job ends or the timeout passes.
    pub fn wait_for_job(&self, id: u64, timeout: Duration) -> Result<UpdateJob, ProjectError> {
        let deadline = Instant::now() + timeout;
        loop {
            let job = self.job_status(id)?;
            if job.state.is_terminal() || Instant::now() >= deadline {
                return Ok(job);
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn list_snapshots(&self) -> Vec<SnapshotSummary> {
        self.snapshots
            .read()
            .unwrap()
            .values()
            .map(|e| e.snapshot.summary())
            .collect()
    }

    pub fn latest_snapshot_id(&self) -> Option<u64> {
        self.snapshots.read().unwrap().keys().next_back().copied()
    }

    pub fn snapshot(&self, id: u64) -> Result<Arc<SnapshotEntry>, ProjectError> {
        self.snapshots
            .read()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or_else(|| not_found("snapshot", id))
    }

    fn resolve(&self, id: Option<u64>) -> Result<Arc<SnapshotEntry>, ProjectError> {
        match id.or_else(|| self.latest_snapshot_id()) {
            Some(id) => self.snapshot(id),
            None => Err(not_found("snapshot", "latest")),
        }
    }

    /// Map for one snapshot. With `level` only that level's outlines are
    /// included, otherwise all levels.
    pub fn map(
        &self,
        snapshot: Option<u64>,
        level: Option<usize>,
        filter: &CodeFilter,
    ) -> Result<MapPayload, ProjectError> {
        let entry = self.resolve(snapshot)?;
        let layout = &entry.layout;
        let levels: Vec<usize> = match level {
            Some(l) => vec![l],
            None => (0..layout.depth()).collect(),
        };
        let mut boundaries = BTreeMap::new();
        for l in levels {
            let rings = region_boundaries(layout, l)?
                .into_iter()
                .map(|(c, r)| (c.to_string(), r))
                .collect();
            boundaries.insert(l.to_string(), rings);
        }
        let store = self.annotations.read().unwrap();
        Ok(MapPayload {
            snapshot_id: entry.snapshot.snapshot_id,
            annotation_version: store.version,
            order: layout.order,
            depth: layout.depth(),
            hexes: layout.placed(),
            boundaries,
            pins: pin_overlay(layout, &store, filter),
        })
    }

    /// Title, body (first `preview` characters when given) and highlights.
    pub fn document(&self, id: &str, preview: Option<usize>) -> Result<DocumentView, ProjectError> {
        let doc = self
            .corpus
            .document(id)
            .ok_or_else(|| not_found("document", id))?;
        let (body, truncated) = match preview {
            Some(n) if n < doc.body_len() => (doc.body.chars().take(n).collect(), true),
            _ => (doc.body.clone(), false),
        };
        let highlights = self
            .annotations
            .read()
            .unwrap()
            .highlights_for_doc(id)
            .cloned()
            .collect();
        Ok(DocumentView {
            id: doc.id.clone(),
            title: doc.title.clone(),
            body,
            body_len: doc.body_len(),
            truncated,
            highlights,
        })
    }

    pub fn sample_random(
        &self,
        n: usize,
        seed: u64,
        exclude: &[String],
    ) -> Result<Vec<String>, ProjectError> {
        let ids: Vec<String> = self
            .corpus
            .documents()
            .iter()
            .map(|d| d.id.clone())
            .collect();
        let exclude: HashSet<String> = exclude.iter().cloned().collect();
        let ex = (!exclude.is_empty()).then_some(&exclude);
        Ok(sampler::random_sample(&ids, n, seed, ex).map_err(sampler_error)?)
    }

    pub fn sample_cluster(
        &self,
        snapshot: Option<u64>,
        cluster: u32,
        level: usize,
        k: Option<usize>,
    ) -> Result<Vec<RankedDoc>, ProjectError> {
        let entry = self.resolve(snapshot)?;
        let k = k.unwrap_or(DEFAULT_CLUSTER_SAMPLE);
        sampler::sample_by_word_cluster(&self.text, &entry.snapshot.partition, cluster, level, k)
            .map_err(sampler_error)
    }

    pub fn word_tree(
        &self,
        snapshot: Option<u64>,
        codes: &[String],
    ) -> Result<Vec<WordTreeNode>, ProjectError> {
        let entry = self.resolve(snapshot)?;
        let store = self.annotations.read().unwrap();
        sampler::pruned_word_tree(
            self.corpus.vocabulary(),
            &entry.snapshot.partition,
            &store,
            codes,
        )
        .map_err(sampler_error)
    }

    /// Stem candidates for a character span of a document body.
    pub fn keyword_candidates(
        &self,
        doc_id: &str,
        start: usize,
        end: usize,
    ) -> Result<Vec<StemCandidate>, ProjectError> {
        let doc = self
            .corpus
            .document(doc_id)
            .ok_or_else(|| not_found("document", doc_id))?;
        let passage = doc
            .slice(Span::new(start, end))
            .ok_or(AnnotationError::SpanOutOfRange {
                start,
                end,
                len: doc.body_len(),
            })?;
        Ok(self.corpus.stem_candidates(passage))
    }

    pub fn export_csv(&self) -> Result<String, ProjectError> {
        Ok(self
            .annotations
            .read()
            .unwrap()
            .export_csv_string(&self.corpus)?)
    }
}

fn sampler_error(e: sampler::SamplerError) -> ProjectError {
    match e {
        sampler::SamplerError::NotFound { kind, id } => ProjectError::NotFound { kind, id },
        other => ProjectError::Sampler(other),
    }
}
