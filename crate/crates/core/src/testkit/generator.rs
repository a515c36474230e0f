//! Seeded synthetic ontologies, embedding tables and label sets.

use std::collections::HashSet;

use thiserror::Error;

use super::rng::SplitMix64;
use crate::embedding::{EmbeddingStore, Vector};
use crate::labels::{Label, LabelSet};
use crate::ontology::{OntologyDocument, OntologyNode, TaskArticle, ONTOLOGY_FORMAT_VERSION};

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Inclusive node count range.
    pub nodes: (usize, usize),
    pub max_fanout: usize,
    /// Maximum depth below the root (root has depth 0).
    pub max_depth: usize,
    /// Inclusive articles-per-node range; leaves always get at least one.
    pub articles_per_node: (usize, usize),
    pub dimension: usize,
    pub vocabulary: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            nodes: (1, 50),
            max_fanout: 4,
            max_depth: 6,
            articles_per_node: (0, 3),
            dimension: 8,
            vocabulary: 100,
        }
    }
}

impl GeneratorConfig {
    /// Small random instance parameters derived from `seed`: up to 200 nodes
    /// and dimension at most 16.
    pub fn random_small(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed ^ 0x5EED_F00D);
        let max_nodes = rng.range(1, 200);
        let min_nodes = rng.range(1, max_nodes);
        let max_fanout = rng.range(1, 6);
        let max_depth = rng.range(1, 12);
        Self {
            seed,
            nodes: (min_nodes.min(tree_capacity(max_fanout, max_depth)), max_nodes),
            max_fanout,
            max_depth,
            articles_per_node: (0, rng.range(1, 4)),
            dimension: rng.range(1, 16),
            vocabulary: rng.range(10, 150),
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Invalid(m.to_string()));
        if self.nodes.0 == 0 || self.nodes.0 > self.nodes.1 {
            return bad("node range must be non-empty and start at 1 or more");
        }
        if self.articles_per_node.0 > self.articles_per_node.1 {
            return bad("articles-per-node range is empty");
        }
        if self.dimension == 0 {
            return bad("dimension must be positive");
        }
        if self.vocabulary == 0 {
            return bad("vocabulary must be non-empty");
        }
        let capacity = tree_capacity(self.max_fanout, self.max_depth);
        if capacity < self.nodes.0 {
            return Err(GeneratorError::Infeasible(format!(
                "fanout {} and depth {} hold at most {capacity} nodes, fewer than the minimum {}",
                self.max_fanout, self.max_depth, self.nodes.0
            )));
        }
        Ok(())
    }
}

fn tree_capacity(fanout: usize, depth: usize) -> usize {
    let mut total = 1usize;
    let mut level = 1usize;
    for _ in 0..depth {
        level = level.saturating_mul(fanout);
        total = total.saturating_add(level);
        if level == 0 {
            break;
        }
    }
    total
}

/// A generated ontology document plus the embedding table its article
/// titles were drawn from.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub ontology: OntologyDocument,
    pub store: EmbeddingStore,
    pub tokens: Vec<String>,
}

fn token_name(i: usize) -> String {
    format!("w{i}")
}

/// Deterministic in `config.seed`. Node count is drawn from the range and
/// capped at what the fanout and depth limits can hold.
pub fn generate_ontology(config: &GeneratorConfig) -> Result<Synthetic, GeneratorError> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);

    let tokens: Vec<String> = (0..config.vocabulary).map(token_name).collect();
    let mut store = EmbeddingStore::new(config.dimension);
    for t in &tokens {
        let v = loop {
            let c: Vec<f64> = (0..config.dimension).map(|_| rng.uniform(-1.0, 1.0)).collect();
            if c.iter().any(|x| *x != 0.0) {
                break c;
            }
        };
        store
            .insert(t, Vector::new(v).expect("finite"))
            .expect("dimension matches");
    }

    let capacity = tree_capacity(config.max_fanout, config.max_depth);
    let n = rng.range(config.nodes.0, config.nodes.1).min(capacity);

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut depth = vec![0usize; n];
    // Each node draws article tokens mostly from a small topic pool that
    // extends its parent's, so related categories share vocabulary.
    let mut topics: Vec<Vec<usize>> = Vec::with_capacity(n);
    topics.push((0..3).map(|_| rng.below(config.vocabulary)).collect());
    let mut open: Vec<usize> = if config.max_depth > 0 && config.max_fanout > 0 {
        vec![0]
    } else {
        Vec::new()
    };
    for node in 1..n {
        let slot = rng.below(open.len());
        let parent = open[slot];
        children[parent].push(node);
        depth[node] = depth[parent] + 1;
        if children[parent].len() == config.max_fanout {
            open.swap_remove(slot);
        }
        if depth[node] < config.max_depth {
            open.push(node);
        }
        let inherited = &topics[parent];
        let mut pool: Vec<usize> = inherited[inherited.len().saturating_sub(4)..].to_vec();
        pool.extend((0..2).map(|_| rng.below(config.vocabulary)));
        topics.push(pool);
    }

    let mut articles = Vec::new();
    let mut nodes = Vec::with_capacity(n);
    for node in 0..n {
        let mut count = rng.range(config.articles_per_node.0, config.articles_per_node.1);
        if children[node].is_empty() {
            count = count.max(1);
        }
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            let id = format!("a{}", articles.len());
            let pick = |rng: &mut SplitMix64| {
                if rng.chance(0.7) {
                    let pool = &topics[node];
                    pool[rng.below(pool.len())]
                } else {
                    rng.below(config.vocabulary)
                }
            };
            let title_len = rng.range(1, 3);
            let title: Vec<String> = (0..title_len).map(|_| tokens[pick(&mut rng)].clone()).collect();
            let body_len = rng.range(0, 5);
            let mut body: Vec<String> = (0..body_len).map(|_| tokens[pick(&mut rng)].clone()).collect();
            if rng.chance(0.2) {
                body.push(format!("oov{}", rng.below(1000)));
            }
            articles.push(TaskArticle {
                id: id.clone(),
                title: title.join(" "),
                body: body.join(" "),
            });
            ids.push(id);
        }
        nodes.push(OntologyNode {
            id: format!("n{node}"),
            name: format!("Category {node}"),
            children: children[node].iter().map(|c| format!("n{c}")).collect(),
            articles: ids,
        });
    }

    Ok(Synthetic {
        ontology: OntologyDocument {
            format_version: ONTOLOGY_FORMAT_VERSION,
            root: "n0".into(),
            nodes,
            articles,
        },
        store,
        tokens,
    })
}

/// Random label set over `tokens`: between 1 and `max_labels` distinct
/// tokens, confidences in `[0.1, 1]`.
pub fn generate_labels(rng: &mut SplitMix64, tokens: &[String], max_labels: usize) -> LabelSet {
    assert!(!tokens.is_empty() && max_labels > 0);
    let count = rng.range(1, max_labels.min(tokens.len()));
    let mut seen = HashSet::new();
    let mut labels = Vec::with_capacity(count);
    while labels.len() < count {
        let t = rng.below(tokens.len());
        if seen.insert(t) {
            labels.push(Label {
                text: tokens[t].clone(),
                confidence: 1.0 - 0.9 * rng.unit(),
            });
        }
    }
    LabelSet::new(labels, Some("synthetic".into())).expect("confidences in range")
}

/// Labels built from the title tokens of `article`, the shape a perfect
/// classifier would emit for an image of that task.
pub fn labels_for_article(rng: &mut SplitMix64, article: &TaskArticle) -> LabelSet {
    let mut seen = HashSet::new();
    let labels: Vec<Label> = crate::embedding::tokenize(&article.title)
        .filter(|t| seen.insert(t.clone()))
        .map(|t| Label {
            text: t,
            confidence: 1.0 - 0.5 * rng.unit(),
        })
        .collect();
    LabelSet::new(labels, Some("synthetic".into())).expect("titles are non-empty")
}
