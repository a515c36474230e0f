//! Offline evaluation: hit@1, hit@5 and mean reciprocal rank over a corpus
//! of (label file, gold article) pairs.
//!
//! Rows whose label file cannot be read or whose gold article is not in the
//! ontology are listed with their error and excluded from the metrics.
//! Rows that fail at inference time (for example every label filtered away)
//! stay in the metrics as misses.

use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{read_labels, Engine, InferOptions, OUTPUT_FORMAT_VERSION};

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported corpus format_version {0}")]
    UnknownVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Label document, relative paths resolved against the corpus file.
    pub labels: PathBuf,
    pub gold: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub format_version: u32,
    pub records: Vec<EvalRecord>,
}

impl Corpus {
    pub fn load<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let corpus: Corpus = serde_json::from_reader(reader)?;
        if corpus.format_version != CORPUS_FORMAT_VERSION {
            return Err(CorpusError::UnknownVersion(corpus.format_version));
        }
        Ok(corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub labels: PathBuf,
    pub gold: String,
    /// 1-based rank of the gold article within the top `k`, if present.
    pub rank: Option<usize>,
    pub reciprocal_rank: f64,
    pub excluded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub k: usize,
    pub scored: usize,
    pub excluded: usize,
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub mrr: f64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Aggregates metrics from per-query rows.
    pub fn from_rows(k: usize, rows: Vec<EvalRow>) -> Self {
        let scored: Vec<&EvalRow> = rows.iter().filter(|r| !r.excluded).collect();
        let n = scored.len();
        let rate = |pred: &dyn Fn(&EvalRow) -> bool| {
            if n == 0 {
                0.0
            } else {
                scored.iter().filter(|r| pred(r)).count() as f64 / n as f64
            }
        };
        let hit_at_1 = rate(&|r| r.rank.is_some_and(|x| x <= 1));
        let hit_at_5 = rate(&|r| r.rank.is_some_and(|x| x <= 5));
        let mrr = if n == 0 {
            0.0
        } else {
            scored.iter().map(|r| r.reciprocal_rank).sum::<f64>() / n as f64
        };
        Self {
            format_version: OUTPUT_FORMAT_VERSION,
            k,
            scored: n,
            excluded: rows.len() - n,
            hit_at_1,
            hit_at_5,
            mrr,
            rows,
        }
    }
}

fn evaluate_record(engine: &Engine, record: &EvalRecord, base: &Path, options: &InferOptions) -> EvalRow {
    let mut row = EvalRow {
        labels: record.labels.clone(),
        gold: record.gold.clone(),
        rank: None,
        reciprocal_rank: 0.0,
        excluded: false,
        error: None,
    };
    if engine.ontology.article_ix(&record.gold).is_none() {
        row.excluded = true;
        row.error = Some(format!("gold article {:?} is not in the ontology", record.gold));
        return row;
    }
    let labels = match read_labels(&base.join(&record.labels)) {
        Ok(l) => l,
        Err(e) => {
            row.excluded = true;
            row.error = Some(e.to_string());
            return row;
        }
    };
    match engine.infer(&labels, options) {
        Ok(inference) => {
            row.rank = inference
                .suggestions
                .iter()
                .find(|s| s.article_id == record.gold)
                .map(|s| s.rank);
            row.reciprocal_rank = row.rank.map_or(0.0, |r| 1.0 / r as f64);
        }
        Err(e) => row.error = Some(format!("{}: {e}", e.name())),
    }
    row
}

/// Runs every record; rows come back in corpus order.
pub fn evaluate(engine: &Engine, corpus: &Corpus, base: &Path, options: &InferOptions) -> EvalReport {
    let rows = corpus
        .records
        .par_iter()
        .map(|r| evaluate_record(engine, r, base, options))
        .collect();
    EvalReport::from_rows(options.k, rows)
}
