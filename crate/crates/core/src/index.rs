//! Per-node representative and average embeddings over an ontology, and
//! their persisted form.
//!
//! The representative embedding of a node is the mean of its own article
//! embeddings. The average embedding is the mean of the children's average
//! embeddings, and equals the representative embedding at leaves. Both are
//! evaluated bottom-up over the preorder so deep hierarchies never recurse.

use std::io::{Read, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{mean, EmbeddingStore, Vector};
use crate::ontology::{ArticleIx, NodeIx, Ontology, TaskArticle};

pub const INDEX_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unusable index: the root has no average embedding (no article shares vocabulary with the embeddings)")]
    Unusable,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("average of {node:?} requested before its child {child:?} was computed")]
    NotYetComputed { node: String, child: String },
    #[error("malformed index document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown index format_version {0}")]
    UnknownVersion(u64),
    #[error("index field mismatch: {0}")]
    FieldMismatch(String),
    #[error("{what} checksum mismatch: index expects {expected:016x}, input has {found:016x}")]
    ChecksumMismatch {
        what: &'static str,
        expected: u64,
        found: u64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub node_id: String,
    pub representative: Option<Vector>,
    pub average: Option<Vector>,
    /// Set when the node has no embeddable articles of its own and the
    /// representative was taken over its whole subtree instead.
    pub representative_is_fallback: bool,
}

/// Where the inputs of an index were read from, so inference can reopen
/// them from the index file alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSources {
    pub ontology: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskIndex {
    pub ontology_checksum: u64,
    pub embeddings_checksum: u64,
    pub dimension: usize,
    /// One entry per ontology node, in ontology node order.
    pub nodes: Vec<NodeEmbeddings>,
    /// One entry per ontology article, in ontology article order.
    pub articles: Vec<(String, Option<Vector>)>,
    pub sources: Option<IndexSources>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub nodes: usize,
    pub articles: usize,
    pub absent_article_embeddings: usize,
    pub absent_representatives: usize,
    pub absent_averages: usize,
    pub fallback_representatives: usize,
}

pub fn embed_article(article: &TaskArticle, store: &EmbeddingStore) -> Option<Vector> {
    store.embed_text(&format!("{} {}", article.title, article.body))
}

/// Representative embedding of `node` given precomputed article embeddings
/// (indexed by [`ArticleIx`]). Returns the vector and the fallback flag.
pub(crate) fn representative_from(
    ontology: &Ontology,
    article_vectors: &[Option<Vector>],
    node: NodeIx,
) -> (Option<Vector>, bool) {
    let own = present(article_vectors, ontology.articles_of(node).iter().copied());
    if let Some(v) = mean(own) {
        return (Some(v), false);
    }
    let subtree = ontology.descendants_articles_ix(node);
    match mean(present(article_vectors, subtree.into_iter())) {
        Some(v) => (Some(v), true),
        None => (None, false),
    }
}

fn present<'a>(
    article_vectors: &'a [Option<Vector>],
    ids: impl Iterator<Item = ArticleIx> + 'a,
) -> impl Iterator<Item = &'a Vector> + 'a {
    ids.filter_map(move |a| article_vectors[a.0].as_ref())
}

/// Representative embedding of the node with id `node`, embedding the
/// relevant articles on the fly.
pub fn compute_representative(
    node: &str,
    ontology: &Ontology,
    store: &EmbeddingStore,
) -> Result<(Option<Vector>, bool), IndexError> {
    let ix = ontology
        .node_ix(node)
        .ok_or_else(|| IndexError::UnknownNode(node.to_string()))?;
    let article_vectors: Vec<Option<Vector>> = ontology
        .article_indices()
        .map(|a| embed_article(ontology.article(a), store))
        .collect();
    Ok(representative_from(ontology, &article_vectors, ix))
}

/// Average embedding of `node` from a partially built table: `averages[c]`
/// is `Some(_)` once child `c` has been computed.
pub fn compute_average(
    node: NodeIx,
    ontology: &Ontology,
    representative: Option<&Vector>,
    averages: &[Option<Option<Vector>>],
) -> Result<Option<Vector>, IndexError> {
    if node.0 >= ontology.node_count() {
        return Err(IndexError::UnknownNode(format!("#{}", node.0)));
    }
    let children = ontology.children(node);
    if children.is_empty() {
        return Ok(representative.cloned());
    }
    let mut present = Vec::with_capacity(children.len());
    for &c in children {
        match &averages[c.0] {
            Some(avg) => present.extend(avg.as_ref()),
            None => {
                return Err(IndexError::NotYetComputed {
                    node: ontology.node(node).id.clone(),
                    child: ontology.node(c).id.clone(),
                })
            }
        }
    }
    Ok(mean(present))
}

pub fn build_index(ontology: &Ontology, store: &EmbeddingStore) -> Result<TaskIndex, IndexError> {
    let article_vectors: Vec<Option<Vector>> = ontology
        .article_indices()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|a| embed_article(ontology.article(a), store))
        .collect();

    let n = ontology.node_count();
    let mut representatives: Vec<(Option<Vector>, bool)> = vec![(None, false); n];
    let mut averages: Vec<Option<Option<Vector>>> = vec![None; n];
    for &node in ontology.preorder().iter().rev() {
        let rep = representative_from(ontology, &article_vectors, node);
        let avg = compute_average(node, ontology, rep.0.as_ref(), &averages)?;
        averages[node.0] = Some(avg);
        representatives[node.0] = rep;
    }

    if averages[ontology.root().0].as_ref().is_none_or(Option::is_none) {
        return Err(IndexError::Unusable);
    }

    let nodes = ontology
        .node_indices()
        .zip(representatives.into_iter().zip(averages))
        .map(|(ix, ((rep, fallback), avg))| NodeEmbeddings {
            node_id: ontology.node(ix).id.clone(),
            representative: rep,
            average: avg.expect("every reachable node is computed"),
            representative_is_fallback: fallback,
        })
        .collect();
    let articles = ontology
        .article_indices()
        .zip(article_vectors)
        .map(|(a, v)| (ontology.article(a).id.clone(), v))
        .collect();

    Ok(TaskIndex {
        ontology_checksum: ontology.checksum(),
        embeddings_checksum: store.checksum(),
        dimension: store.dimension(),
        nodes,
        articles,
        sources: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexDocument {
    format_version: u64,
    ontology_checksum: String,
    embeddings_checksum: String,
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sources: Option<IndexSources>,
    nodes: Vec<NodeRecord>,
    articles: Vec<ArticleRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    representative: Option<String>,
    average: Option<String>,
    representative_is_fallback: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArticleRecord {
    id: String,
    embedding: Option<String>,
}

impl TaskIndex {
    pub fn node(&self, ix: NodeIx) -> &NodeEmbeddings {
        &self.nodes[ix.0]
    }

    pub fn article_vector(&self, ix: ArticleIx) -> Option<&Vector> {
        self.articles[ix.0].1.as_ref()
    }

    pub fn summary(&self) -> IndexSummary {
        IndexSummary {
            nodes: self.nodes.len(),
            articles: self.articles.len(),
            absent_article_embeddings: self.articles.iter().filter(|a| a.1.is_none()).count(),
            absent_representatives: self
                .nodes
                .iter()
                .filter(|n| n.representative.is_none())
                .count(),
            absent_averages: self.nodes.iter().filter(|n| n.average.is_none()).count(),
            fallback_representatives: self
                .nodes
                .iter()
                .filter(|n| n.representative_is_fallback)
                .count(),
        }
    }

    /// Checks that this index was built from exactly `ontology` and `store`.
    pub fn verify_inputs(&self, ontology: &Ontology, store: &EmbeddingStore) -> Result<(), IndexError> {
        let found = ontology.checksum();
        if found != self.ontology_checksum {
            return Err(IndexError::ChecksumMismatch {
                what: "ontology",
                expected: self.ontology_checksum,
                found,
            });
        }
        let found = store.checksum();
        if found != self.embeddings_checksum {
            return Err(IndexError::ChecksumMismatch {
                what: "embeddings",
                expected: self.embeddings_checksum,
                found,
            });
        }
        if self.dimension != store.dimension() {
            return Err(IndexError::FieldMismatch(format!(
                "dimension {} vs embeddings {}",
                self.dimension,
                store.dimension()
            )));
        }
        let nodes_match = self.nodes.len() == ontology.node_count()
            && ontology
                .node_indices()
                .all(|ix| self.nodes[ix.0].node_id == ontology.node(ix).id);
        let articles_match = self.articles.len() == ontology.article_count()
            && ontology
                .article_indices()
                .all(|ix| self.articles[ix.0].0 == ontology.article(ix).id);
        if !nodes_match || !articles_match {
            return Err(IndexError::FieldMismatch(
                "node or article table does not match the ontology".into(),
            ));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), IndexError> {
        let doc = IndexDocument {
            format_version: INDEX_FORMAT_VERSION,
            ontology_checksum: format!("{:016x}", self.ontology_checksum),
            embeddings_checksum: format!("{:016x}", self.embeddings_checksum),
            dimension: self.dimension,
            sources: self.sources.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.node_id.clone(),
                    representative: n.representative.as_ref().map(Vector::to_hex),
                    average: n.average.as_ref().map(Vector::to_hex),
                    representative_is_fallback: n.representative_is_fallback,
                })
                .collect(),
            articles: self
                .articles
                .iter()
                .map(|(id, v)| ArticleRecord {
                    id: id.clone(),
                    embedding: v.as_ref().map(Vector::to_hex),
                })
                .collect(),
        };
        serde_json::to_writer(out, &doc)?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self, IndexError> {
        let value: serde_json::Value = serde_json::from_reader(source)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| IndexError::FieldMismatch("missing format_version".into()))?;
        if version != INDEX_FORMAT_VERSION {
            return Err(IndexError::UnknownVersion(version));
        }
        let doc: IndexDocument = serde_json::from_value(value)?;
        let dimension = doc.dimension;
        if dimension == 0 {
            return Err(IndexError::FieldMismatch("dimension must be positive".into()));
        }
        let decode = |field: &str, owner: &str, text: Option<String>| -> Result<Option<Vector>, IndexError> {
            let Some(text) = text else { return Ok(None) };
            let v = Vector::from_hex(&text).ok_or_else(|| {
                IndexError::FieldMismatch(format!("{owner}: {field} is not a valid vector"))
            })?;
            if v.dimension() != dimension {
                return Err(IndexError::FieldMismatch(format!(
                    "{owner}: {field} has {} components, expected {dimension}",
                    v.dimension()
                )));
            }
            Ok(Some(v))
        };
        let nodes = doc
            .nodes
            .into_iter()
            .map(|r| {
                Ok(NodeEmbeddings {
                    representative: decode("representative", &r.id, r.representative)?,
                    average: decode("average", &r.id, r.average)?,
                    representative_is_fallback: r.representative_is_fallback,
                    node_id: r.id,
                })
            })
            .collect::<Result<Vec<_>, IndexError>>()?;
        let articles = doc
            .articles
            .into_iter()
            .map(|r| Ok((r.id.clone(), decode("embedding", &r.id, r.embedding)?)))
            .collect::<Result<Vec<_>, IndexError>>()?;
        Ok(Self {
            ontology_checksum: parse_checksum(&doc.ontology_checksum)?,
            embeddings_checksum: parse_checksum(&doc.embeddings_checksum)?,
            dimension,
            nodes,
            articles,
            sources: doc.sources,
        })
    }
}

fn parse_checksum(text: &str) -> Result<u64, IndexError> {
    if text.len() != 16 {
        return Err(IndexError::FieldMismatch(format!("bad checksum {text:?}")));
    }
    u64::from_str_radix(text, 16)
        .map_err(|_| IndexError::FieldMismatch(format!("bad checksum {text:?}")))
}
