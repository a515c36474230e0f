//! Greedy descent of a label set through the ontology.
//!
//! First-order trickling moves the confidence-weighted label centroid from
//! the root toward the child whose average embedding is most similar, and
//! stops once the current node's representative embedding is at least as
//! similar as every child. That similarity becomes a fixed threshold.
//! Second-order trickling then lets each label descend on its own below the
//! stop node, one hop at a time, for as long as some child beats the
//! threshold strictly.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine_unchecked, weighted_average, EmbeddingError, Vector, ZERO_NORM_COSINE};
use crate::index::TaskIndex;
use crate::labels::{EmbeddedLabel, Label};
use crate::ontology::{NodeIx, Ontology};

#[derive(Debug, Error)]
pub enum TrickleError {
    #[error("unusable index: the root has no average embedding")]
    Unusable,
    #[error("cannot embed label set: {0}")]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrickleStop {
    pub node: NodeIx,
    /// Similarity between the query and the stop node's representative.
    pub threshold: f64,
    /// Root to stop node inclusive.
    pub path: Vec<NodeIx>,
    pub query: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub node: NodeIx,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    pub label: Label,
    pub resident: NodeIx,
    /// Hops taken below the stop node; empty when the label stayed there.
    pub hops: Vec<Hop>,
}

impl LabelAssignment {
    pub fn final_similarity(&self) -> Option<f64> {
        self.hops.last().map(|h| h.similarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrickleResult {
    pub stop: TrickleStop,
    pub assignments: Vec<LabelAssignment>,
    pub captured: NodeIx,
}

/// Confidence-weighted mean of the label embeddings.
pub fn embed_label_set(labels: &[EmbeddedLabel]) -> Result<Vector, EmbeddingError> {
    let vectors: Vec<&Vector> = labels.iter().map(|l| &l.vector).collect();
    let weights: Vec<f64> = labels.iter().map(|l| l.label.confidence).collect();
    weighted_average(&vectors, &weights)
}

/// Most similar child by average embedding; first in child order on ties.
fn best_child(
    query: &[f64],
    node: NodeIx,
    ontology: &Ontology,
    index: &TaskIndex,
) -> Option<(NodeIx, f64)> {
    let mut best: Option<(NodeIx, f64)> = None;
    for &child in ontology.children(node) {
        let Some(avg) = &index.node(child).average else {
            continue;
        };
        let s = cosine_unchecked(query, avg);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((child, s));
        }
    }
    best
}

pub fn first_order_trickle(
    query: &Vector,
    ontology: &Ontology,
    index: &TaskIndex,
) -> Result<TrickleStop, TrickleError> {
    let root = ontology.root();
    if index.node(root).average.is_none() {
        return Err(TrickleError::Unusable);
    }
    let mut current = root;
    let mut path = vec![root];
    loop {
        let own = index
            .node(current)
            .representative
            .as_ref()
            .map(|r| cosine_unchecked(query, r));
        match best_child(query, current, ontology, index) {
            Some((child, s)) if own.is_none_or(|r| r < s) => {
                current = child;
                path.push(child);
            }
            _ => {
                return Ok(TrickleStop {
                    node: current,
                    threshold: own.unwrap_or(ZERO_NORM_COSINE),
                    path,
                    query: query.clone(),
                })
            }
        }
    }
}

fn descend_label(
    label: &EmbeddedLabel,
    stop: &TrickleStop,
    ontology: &Ontology,
    index: &TaskIndex,
) -> LabelAssignment {
    let mut current = stop.node;
    let mut hops = Vec::new();
    while let Some((child, s)) = best_child(&label.vector, current, ontology, index) {
        if s <= stop.threshold {
            break;
        }
        hops.push(Hop {
            node: child,
            similarity: s,
        });
        current = child;
    }
    LabelAssignment {
        label: label.label.clone(),
        resident: current,
        hops,
    }
}

/// Per-label descent below `stop`, in label order.
pub fn second_order_trickle(
    labels: &[EmbeddedLabel],
    stop: &TrickleStop,
    ontology: &Ontology,
    index: &TaskIndex,
) -> Vec<LabelAssignment> {
    labels
        .par_iter()
        .map(|l| descend_label(l, stop, ontology, index))
        .collect()
}

/// Node holding the largest total confidence of resident labels. Ties go to
/// the deeper node, then to the earlier node in preorder.
pub fn capture_node(assignments: &[LabelAssignment], stop: &TrickleStop, ontology: &Ontology) -> NodeIx {
    let mut mass: HashMap<NodeIx, f64> = HashMap::new();
    for a in assignments {
        *mass.entry(a.resident).or_insert(0.0) += a.label.confidence;
    }
    mass.into_iter()
        .max_by(|(na, ma), (nb, mb)| {
            ma.total_cmp(mb)
                .then_with(|| ontology.depth(*na).cmp(&ontology.depth(*nb)))
                .then_with(|| ontology.preorder_rank(*nb).cmp(&ontology.preorder_rank(*na)))
        })
        .map_or(stop.node, |(n, _)| n)
}

/// Both trickling phases and node capture.
pub fn trickle(
    labels: &[EmbeddedLabel],
    ontology: &Ontology,
    index: &TaskIndex,
) -> Result<TrickleResult, TrickleError> {
    let query = embed_label_set(labels)?;
    let stop = first_order_trickle(&query, ontology, index)?;
    let assignments = second_order_trickle(labels, &stop, ontology, index);
    let captured = capture_node(&assignments, &stop, ontology);
    Ok(TrickleResult {
        stop,
        assignments,
        captured,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HopReport {
    pub node: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEntry {
    pub node: String,
    pub name: String,
    pub representative_is_fallback: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignmentReport {
    pub label: String,
    pub confidence: f64,
    pub resident: String,
    pub hops: Vec<HopReport>,
}

/// Diagnostic view of a [`TrickleResult`] keyed by string ids.
#[derive(Debug, Clone, Serialize)]
pub struct TrickleReport {
    pub stop_node: String,
    pub threshold: f64,
    pub path: Vec<PathEntry>,
    pub query: Vec<f64>,
    pub assignments: Vec<AssignmentReport>,
    pub captured: String,
}

impl TrickleReport {
    pub fn new(result: &TrickleResult, ontology: &Ontology, index: &TaskIndex) -> Self {
        let id = |n: NodeIx| ontology.node(n).id.clone();
        Self {
            stop_node: id(result.stop.node),
            threshold: result.stop.threshold,
            path: result
                .stop
                .path
                .iter()
                .map(|&n| PathEntry {
                    node: id(n),
                    name: ontology.node(n).name.clone(),
                    representative_is_fallback: index.node(n).representative_is_fallback,
                })
                .collect(),
            query: result.stop.query.as_slice().to_vec(),
            assignments: result
                .assignments
                .iter()
                .map(|a| AssignmentReport {
                    label: a.label.text.clone(),
                    confidence: a.label.confidence,
                    resident: id(a.resident),
                    hops: a
                        .hops
                        .iter()
                        .map(|h| HopReport {
                            node: id(h.node),
                            similarity: h.similarity,
                        })
                        .collect(),
                })
                .collect(),
            captured: id(result.captured),
        }
    }
}
