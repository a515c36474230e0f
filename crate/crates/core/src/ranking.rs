//! Ranking of candidate tasks at the captured node.
//!
//! The query vector used for scoring is chosen by a [`QueryStrategy`], looked
//! up by name in a [`StrategyRegistry`] (`all` or `resident` out of the box).

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{cosine_unchecked, Vector};
use crate::index::TaskIndex;
use crate::labels::EmbeddedLabel;
use crate::ontology::{ArticleIx, NodeIx, Ontology};
use crate::trickle::{embed_label_set, TrickleResult};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no embeddable candidate task under node {0:?}")]
    NoCandidates(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("unknown ranking strategy {name:?} (available: {available})")]
    UnknownStrategy { name: String, available: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSuggestion {
    pub rank: usize,
    pub title: String,
    pub score: f64,
    pub article_id: String,
}

/// Descending score, then ascending article id.
fn suggestion_order(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Direct articles of `captured` with an embedding, or failing that every
/// embeddable article in its subtree.
pub fn candidates(captured: NodeIx, ontology: &Ontology, index: &TaskIndex) -> Vec<ArticleIx> {
    let embeddable = |a: &ArticleIx| index.article_vector(*a).is_some();
    let direct: Vec<ArticleIx> = ontology
        .articles_of(captured)
        .iter()
        .copied()
        .filter(embeddable)
        .collect();
    if !direct.is_empty() {
        return direct;
    }
    ontology
        .descendants_articles_ix(captured)
        .into_iter()
        .filter(embeddable)
        .collect()
}

pub fn rank_tasks(
    captured: NodeIx,
    query: &Vector,
    ontology: &Ontology,
    index: &TaskIndex,
    k: usize,
) -> Result<Vec<TaskSuggestion>, RankError> {
    if k == 0 {
        return Err(RankError::ZeroK);
    }
    let pool = candidates(captured, ontology, index);
    if pool.is_empty() {
        return Err(RankError::NoCandidates(ontology.node(captured).id.clone()));
    }
    let mut scored: Vec<(f64, &str, ArticleIx)> = pool
        .into_iter()
        .map(|a| {
            let v = index.article_vector(a).expect("candidates are embeddable");
            (cosine_unchecked(query, v), ontology.article(a).id.as_str(), a)
        })
        .collect();
    scored.sort_by(|x, y| suggestion_order(&(x.0, x.1), &(y.0, y.1)));
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (score, id, a))| TaskSuggestion {
            rank: i + 1,
            title: ontology.article(a).title.clone(),
            score,
            article_id: id.to_string(),
        })
        .collect())
}

/// Inputs a query strategy may draw on.
pub struct QueryContext<'a> {
    pub labels: &'a [EmbeddedLabel],
    pub trickle: &'a TrickleResult,
}

/// Chooses the vector candidate tasks are scored against.
pub trait QueryStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn query(&self, ctx: &QueryContext<'_>) -> Vector;
}

/// Scores against the centroid of every filtered label.
pub struct AllLabels;

impl QueryStrategy for AllLabels {
    fn name(&self) -> &'static str {
        "all"
    }

    fn query(&self, ctx: &QueryContext<'_>) -> Vector {
        ctx.trickle.stop.query.clone()
    }
}

/// Scores against the centroid of the labels resident at the captured node.
/// Falls back to all labels if none reside there.
pub struct ResidentLabels;

impl QueryStrategy for ResidentLabels {
    fn name(&self) -> &'static str {
        "resident"
    }

    fn query(&self, ctx: &QueryContext<'_>) -> Vector {
        let captured = ctx.trickle.captured;
        let resident: Vec<EmbeddedLabel> = ctx
            .labels
            .iter()
            .zip(&ctx.trickle.assignments)
            .filter(|(_, a)| a.resident == captured)
            .map(|(l, _)| l.clone())
            .collect();
        embed_label_set(&resident).unwrap_or_else(|_| ctx.trickle.stop.query.clone())
    }
}

pub struct StrategyRegistry {
    strategies: Vec<Box<dyn QueryStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: Vec::new(),
        }
    }

    /// Adds `strategy`, replacing any existing one with the same name.
    pub fn register(&mut self, strategy: Box<dyn QueryStrategy>) {
        self.strategies.retain(|s| s.name() != strategy.name());
        self.strategies.push(strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn QueryStrategy, RankError> {
        self.strategies
            .iter()
            .find(|s| s.name() == name)
            .map(Box::as_ref)
            .ok_or_else(|| RankError::UnknownStrategy {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.iter().map(|s| s.name()).collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(AllLabels));
        r.register(Box::new(ResidentLabels));
        r
    }
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
