//! Independent re-implementations used to check the engine.
//!
//! Nothing here calls into the embedding, index, trickle or ranking code:
//! tokenization, averaging and cosine are written out again, and the
//! recursions follow the definitions top-down. Only the ontology accessors
//! and the raw embedding lookup are shared.

use crate::embedding::EmbeddingStore;
use crate::index::TaskIndex;
use crate::ontology::{NodeIx, Ontology, TaskArticle};

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn average(vectors: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = vectors.first()?;
    let mut acc = vec![0.0; first.len()];
    for v in vectors {
        for i in 0..acc.len() {
            acc[i] += v[i];
        }
    }
    Some(acc.into_iter().map(|x| x / vectors.len() as f64).collect())
}

/// Cosine clamped to `[-1, 1]`, `-2` when either side is the zero vector.
pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = (0..a.len()).map(|i| a[i] * b[i]).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        -2.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub fn oracle_article_embedding(article: &TaskArticle, store: &EmbeddingStore) -> Option<Vec<f64>> {
    let text = format!("{} {}", article.title, article.body);
    let found: Vec<Vec<f64>> = words(&text)
        .iter()
        .filter_map(|w| store.get(w).map(|v| v.as_slice().to_vec()))
        .collect();
    average(&found)
}

fn subtree_article_embeddings(node: NodeIx, ontology: &Ontology, store: &EmbeddingStore) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = ontology
        .articles_of(node)
        .iter()
        .filter_map(|&a| oracle_article_embedding(ontology.article(a), store))
        .collect();
    for &c in ontology.children(node) {
        out.extend(subtree_article_embeddings(c, ontology, store));
    }
    out
}

/// Mean of the node's own article embeddings, or of its whole subtree when
/// it has none. Second value is the fallback flag.
pub fn oracle_representative(
    node: NodeIx,
    ontology: &Ontology,
    store: &EmbeddingStore,
) -> (Option<Vec<f64>>, bool) {
    let own: Vec<Vec<f64>> = ontology
        .articles_of(node)
        .iter()
        .filter_map(|&a| oracle_article_embedding(ontology.article(a), store))
        .collect();
    if !own.is_empty() {
        return (average(&own), false);
    }
    match average(&subtree_article_embeddings(node, ontology, store)) {
        Some(v) => (Some(v), true),
        None => (None, false),
    }
}

/// Top-down recursive average embedding: the representative at a leaf,
/// otherwise the mean over children whose average exists.
pub fn oracle_average(node: NodeIx, ontology: &Ontology, store: &EmbeddingStore) -> Option<Vec<f64>> {
    let children = ontology.children(node);
    if children.is_empty() {
        return oracle_representative(node, ontology, store).0;
    }
    let present: Vec<Vec<f64>> = children
        .iter()
        .filter_map(|&c| oracle_average(c, ontology, store))
        .collect();
    average(&present)
}

/// Walks down from the root: stop at a leaf, at a node with no child
/// average, or when the node's own representative is at least as similar as
/// the best child; otherwise go to the best child (earliest on ties).
pub fn oracle_greedy_descent(query: &[f64], index: &TaskIndex, ontology: &Ontology) -> NodeIx {
    let mut node = ontology.root();
    loop {
        let mut best_child = None;
        let mut best_score = f64::NEG_INFINITY;
        for &c in ontology.children(node) {
            if let Some(avg) = &index.node(c).average {
                let s = oracle_cosine(query, avg);
                if best_child.is_none() || s > best_score {
                    best_child = Some(c);
                    best_score = s;
                }
            }
        }
        let Some(child) = best_child else {
            return node;
        };
        if let Some(rep) = &index.node(node).representative {
            if oracle_cosine(query, rep) >= best_score {
                return node;
            }
        }
        node = child;
    }
}

/// Scores every candidate article and sorts: descending score, then
/// ascending article id. Candidates are the node's own embeddable articles,
/// or every embeddable article below it when it has none.
pub fn oracle_rank(captured: NodeIx, query: &[f64], index: &TaskIndex, ontology: &Ontology) -> Vec<(String, f64)> {
    let mut pool: Vec<_> = ontology
        .articles_of(captured)
        .iter()
        .filter(|a| index.article_vector(**a).is_some())
        .copied()
        .collect();
    if pool.is_empty() {
        let mut stack = vec![captured];
        let mut all = Vec::new();
        while let Some(n) = stack.pop() {
            all.extend(ontology.articles_of(n).iter().copied());
            for &c in ontology.children(n).iter().rev() {
                stack.push(c);
            }
        }
        pool = all
            .into_iter()
            .filter(|a| index.article_vector(*a).is_some())
            .collect();
    }
    let mut scored: Vec<(String, f64)> = pool
        .into_iter()
        .map(|a| {
            let s = oracle_cosine(query, index.article_vector(a).unwrap());
            (ontology.article(a).id.clone(), s)
        })
        .collect();
    // Insertion sort: quadratic, obviously correct.
    for i in 1..scored.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (&scored[j - 1], &scored[j]);
            let out_of_order = b.1 > a.1 || (b.1 == a.1 && b.0 < a.0);
            if !out_of_order {
                break;
            }
            scored.swap(j - 1, j);
            j -= 1;
        }
    }
    scored
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_splitting() {
        assert_eq!(words("Pitch a Baseball!"), ["pitch", "a", "baseball"]);
        assert!(words(" -- ").is_empty());
    }

    #[test]
    fn cosine_by_hand() {
        assert!((oracle_cosine(&[3.0, 4.0], &[4.0, 3.0]) - 0.96).abs() < 1e-15);
        assert_eq!(oracle_cosine(&[0.0, 0.0], &[1.0, 0.0]), -2.0);
    }
}
