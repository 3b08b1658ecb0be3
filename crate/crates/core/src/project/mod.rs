//! On-disk project: config, corpus, annotations and snapshot history.

mod workbench;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::{AnnotationError, AnnotationStore};
use crate::corpus::{ingest_corpus, Corpus, CorpusError, CorpusStats, Tokenizer, TokenizerConfig};
use crate::inference::{
    build_snapshot, InferenceConfig, JobError, ModelSnapshot, Progress, SnapshotError,
};
use crate::layout::LayoutError;

pub use workbench::{DocumentView, MapPayload, SnapshotEntry, Workbench};

pub const CONFIG_FILE: &str = "project.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{0} is not a project directory (missing {CONFIG_FILE})")]
    NotInitialized(PathBuf),
    #[error("{0} already contains a project")]
    AlreadyInitialized(PathBuf),
    #[error("no corpus ingested yet")]
    NoCorpus,
    #[error("cannot re-ingest: the project already has highlights")]
    HasAnnotations,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Sampler(crate::sampler::SamplerError),
    #[error("unknown {kind} {id}")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    pub tokenizer: TokenizerConfig,
    pub inference: InferenceConfig,
}

#[derive(Clone, Debug)]
pub struct Project {
    dir: PathBuf,
    config: ProjectConfig,
}

impl Project {
    pub fn init(dir: &Path) -> Result<Self, ProjectError> {
        if dir.join(CONFIG_FILE).exists() {
            return Err(ProjectError::AlreadyInitialized(dir.to_path_buf()));
        }
        fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
        let project = Project {
            dir: dir.to_path_buf(),
            config: ProjectConfig::default(),
        };
        project.save_config()?;
        AnnotationStore::new().save(&project.annotations_path())?;
        Ok(project)
    }

    pub fn open(dir: &Path) -> Result<Self, ProjectError> {
        let path = dir.join(CONFIG_FILE);
        if !path.exists() {
            return Err(ProjectError::NotInitialized(dir.to_path_buf()));
        }
        let config: ProjectConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Project {
            dir: dir.to_path_buf(),
            config,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.config
    }

    pub fn set_inference(&mut self, inference: InferenceConfig) -> Result<(), ProjectError> {
        inference.validate().map_err(ProjectError::Config)?;
        self.config.inference = inference;
        self.save_config()
    }

    fn save_config(&self) -> Result<(), ProjectError> {
        let mut text = serde_json::to_string_pretty(&serde_json::to_value(&self.config)?)?;
        text.push('\n');
        write_atomic(&self.dir.join(CONFIG_FILE), text.as_bytes())?;
        Ok(())
    }

    pub fn annotations_path(&self) -> PathBuf {
        self.dir.join(ANNOTATIONS_FILE)
    }

    pub fn snapshot_dir(&self) -> PathBuf {
        self.dir.join(SNAPSHOT_DIR)
    }

    pub fn tokenizer(&self) -> Result<Tokenizer, ProjectError> {
        let mut cfg = self.config.tokenizer.clone();
        if let Some(p) = &cfg.stopwords {
            if p.is_relative() {
                cfg.stopwords = Some(self.dir.join(p));
            }
        }
        Ok(Tokenizer::from_config(&cfg)?)
    }

    /// Validates and stores a corpus file, with optional stopword list and
    /// minimum token length. Existing snapshots are discarded.
    pub fn ingest(
        &mut self,
        input: &Path,
        stopwords: Option<&Path>,
        min_len: Option<usize>,
    ) -> Result<CorpusStats, ProjectError> {
        if !self.load_annotations()?.highlights.is_empty() {
            return Err(ProjectError::HasAnnotations);
        }
        let mut cfg = self.config.tokenizer.clone();
        if let Some(n) = min_len {
            cfg.min_len = n;
        }
        if let Some(path) = stopwords {
            cfg.stopwords = Some(path.to_path_buf());
        }
        let tokenizer = Tokenizer::from_config(&cfg)?;
        let corpus = ingest_corpus(BufReader::new(fs::File::open(input)?), tokenizer)?;
        if let Some(path) = stopwords {
            fs::copy(path, self.dir.join(STOPWORDS_FILE))?;
            cfg.stopwords = Some(PathBuf::from(STOPWORDS_FILE));
        }
        fs::copy(input, self.dir.join(CORPUS_FILE))?;
        self.config.tokenizer = cfg;
        self.save_config()?;
        for id in self.snapshot_ids()? {
            fs::remove_file(self.snapshot_dir().join(ModelSnapshot::file_name(id)))?;
        }
        AnnotationStore::new().save(&self.annotations_path())?;
        Ok(corpus.stats().clone())
    }

    pub fn has_corpus(&self) -> bool {
        self.dir.join(CORPUS_FILE).exists()
    }

    pub fn load_corpus(&self) -> Result<Corpus, ProjectError> {
        if !self.has_corpus() {
            return Err(ProjectError::NoCorpus);
        }
        let file = fs::File::open(self.dir.join(CORPUS_FILE))?;
        Ok(ingest_corpus(BufReader::new(file), self.tokenizer()?)?)
    }

    pub fn load_annotations(&self) -> Result<AnnotationStore, ProjectError> {
        Ok(AnnotationStore::load(&self.annotations_path())?)
    }

    /// Snapshot ids present on disk, ascending.
    pub fn snapshot_ids(&self) -> Result<Vec<u64>, ProjectError> {
        let dir = self.snapshot_dir();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut ids: Vec<u64> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".json")?.parse().ok()
            })
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }

    pub fn load_snapshot(&self, id: u64) -> Result<ModelSnapshot, ProjectError> {
        let path = self.snapshot_dir().join(ModelSnapshot::file_name(id));
        if !path.exists() {
            return Err(ProjectError::NotFound {
                kind: "snapshot",
                id: id.to_string(),
            });
        }
        Ok(ModelSnapshot::load(&path)?)
    }

    pub fn next_snapshot_id(&self) -> Result<u64, ProjectError> {
        Ok(self.snapshot_ids()?.last().map_or(0, |&id| id + 1))
    }

    /// Fits and persists the next snapshot. The first snapshot of a project
    /// is always fitted without annotations.
    pub fn fit(
        &self,
        corpus: &Corpus,
        annotations: &AnnotationStore,
        config: &InferenceConfig,
        progress: Option<&Progress>,
    ) -> Result<ModelSnapshot, ProjectError> {
        let id = self.next_snapshot_id()?;
        let blank = AnnotationStore::new();
        let store = if id == 0 { &blank } else { annotations };
        let snapshot = build_snapshot(corpus, store, config, id, progress)?;
        snapshot.save(&self.snapshot_dir())?;
        Ok(snapshot)
    }
}
