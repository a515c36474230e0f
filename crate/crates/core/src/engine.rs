//! End-to-end inference over a bound ontology, embedding store and index.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingStore};
use crate::index::{build_index, IndexError, IndexSources, TaskIndex};
use crate::labels::{filter_labels, EmbeddedLabel, LabelError, LabelSet, DEFAULT_DEDUP_THRESHOLD, DEFAULT_FLOOR};
use crate::ontology::{Ontology, OntologyError};
use crate::ranking::{rank_tasks, QueryContext, RankError, StrategyRegistry, TaskSuggestion};
use crate::trickle::{trickle, TrickleError, TrickleReport, TrickleResult};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Embeddings {
        path: PathBuf,
        #[source]
        source: EmbeddingError,
    },
    #[error("{path}: {source}")]
    Ontology {
        path: PathBuf,
        #[source]
        source: OntologyError,
    },
    #[error("{path}: {source}")]
    Index {
        path: PathBuf,
        #[source]
        source: IndexError,
    },
    #[error("index does not record its input files")]
    MissingSources,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Trickle(#[from] TrickleError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

impl InferenceError {
    /// Stable kebab-case name for diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Labels(LabelError::EmptyAfterFilter { .. }) => "empty-after-filter",
            Self::Labels(LabelError::InvalidParameter(_)) => "invalid-parameter",
            Self::Labels(_) => "invalid-labels",
            Self::Trickle(TrickleError::Unusable) => "unusable-index",
            Self::Trickle(TrickleError::Embedding(_)) => "degenerate-labels",
            Self::Rank(RankError::NoCandidates(_)) => "no-candidates",
            Self::Rank(RankError::ZeroK) => "invalid-parameter",
            Self::Rank(RankError::UnknownStrategy { .. }) => "unknown-strategy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    pub k: usize,
    pub floor: f64,
    pub dedup_threshold: f64,
    pub rank_with: String,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            k: 5,
            floor: DEFAULT_FLOOR,
            dedup_threshold: DEFAULT_DEDUP_THRESHOLD,
            rank_with: "all".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub labels: Vec<EmbeddedLabel>,
    pub trickle: TrickleResult,
    pub suggestions: Vec<TaskSuggestion>,
}

/// The document `infer` prints.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceDocument {
    pub format_version: u32,
    pub suggestions: Vec<TaskSuggestion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explain: Option<TrickleReport>,
}

#[derive(Debug)]
pub struct Engine {
    pub ontology: Ontology,
    pub store: EmbeddingStore,
    pub index: TaskIndex,
    pub strategies: StrategyRegistry,
}

pub fn read_ontology(path: &Path) -> Result<Ontology, EngineError> {
    let file = File::open(path).map_err(|source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ontology::load(BufReader::new(file)).map_err(|source| EngineError::Ontology {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingStore, EngineError> {
    let file = File::open(path).map_err(|source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    EmbeddingStore::load(BufReader::new(file)).map_err(|source| EngineError::Embeddings {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_labels(path: &Path) -> Result<LabelSet, LabelError> {
    LabelSet::parse(BufReader::new(File::open(path)?))
}

impl Engine {
    /// Binds an already built index; fails if it was built from other inputs.
    pub fn new(ontology: Ontology, store: EmbeddingStore, index: TaskIndex) -> Result<Self, IndexError> {
        index.verify_inputs(&ontology, &store)?;
        Ok(Self {
            ontology,
            store,
            index,
            strategies: StrategyRegistry::default(),
        })
    }

    pub fn build(ontology: Ontology, store: EmbeddingStore) -> Result<Self, IndexError> {
        let index = build_index(&ontology, &store)?;
        Ok(Self {
            ontology,
            store,
            index,
            strategies: StrategyRegistry::default(),
        })
    }

    /// Builds from files and records their absolute paths in the index.
    pub fn build_from_files(ontology_path: &Path, embeddings_path: &Path) -> Result<Self, EngineError> {
        let ontology = read_ontology(ontology_path)?;
        let store = read_embeddings(embeddings_path)?;
        let mut engine = Self::build(ontology, store).map_err(|source| EngineError::Index {
            path: ontology_path.to_path_buf(),
            source,
        })?;
        let absolute = |p: &Path| {
            std::fs::canonicalize(p).map_err(|source| EngineError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        engine.index.sources = Some(IndexSources {
            ontology: absolute(ontology_path)?,
            embeddings: absolute(embeddings_path)?,
        });
        Ok(engine)
    }

    /// Loads an index file and reopens the inputs it records.
    pub fn open(index_path: &Path) -> Result<Self, EngineError> {
        let index_err = |source| EngineError::Index {
            path: index_path.to_path_buf(),
            source,
        };
        let file = File::open(index_path).map_err(|source| EngineError::Io {
            path: index_path.to_path_buf(),
            source,
        })?;
        let index = TaskIndex::load(BufReader::new(file)).map_err(index_err)?;
        let sources = index.sources.clone().ok_or(EngineError::MissingSources)?;
        let ontology = read_ontology(&sources.ontology)?;
        let store = read_embeddings(&sources.embeddings)?;
        Self::new(ontology, store, index).map_err(index_err)
    }

    pub fn save_index(&self, path: &Path) -> Result<(), EngineError> {
        let file = File::create(path).map_err(|source| EngineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.index
            .save(BufWriter::new(file))
            .map_err(|source| EngineError::Index {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Filter, trickle, rank.
    pub fn infer(&self, labels: &LabelSet, options: &InferOptions) -> Result<Inference, InferenceError> {
        let strategy = self.strategies.get(&options.rank_with)?;
        if options.k == 0 {
            return Err(RankError::ZeroK.into());
        }
        let filtered = filter_labels(labels, &self.store, options.floor, options.dedup_threshold)?;
        let result = trickle(&filtered, &self.ontology, &self.index)?;
        let query = strategy.query(&QueryContext {
            labels: &filtered,
            trickle: &result,
        });
        let suggestions = rank_tasks(result.captured, &query, &self.ontology, &self.index, options.k)?;
        Ok(Inference {
            labels: filtered,
            trickle: result,
            suggestions,
        })
    }

    pub fn document(&self, inference: &Inference, explain: bool) -> InferenceDocument {
        InferenceDocument {
            format_version: OUTPUT_FORMAT_VERSION,
            suggestions: inference.suggestions.clone(),
            explain: explain.then(|| TrickleReport::new(&inference.trickle, &self.ontology, &self.index)),
        }
    }
}
