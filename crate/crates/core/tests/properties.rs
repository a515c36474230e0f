mod common;

use proptest::prelude::*;

use task_trickle::embedding::EmbeddingStore;
use task_trickle::index::build_index;
use task_trickle::ontology::{NodeIx, Ontology};
use task_trickle::testkit::{generate_ontology, oracle_representative, GeneratorConfig};

fn generated(seed: u64) -> (Ontology, EmbeddingStore) {
    let s = generate_ontology(&GeneratorConfig::random_small(seed)).unwrap();
    (Ontology::from_document(s.ontology).unwrap(), s.store)
}

/// Leaf representatives under `node`, each paired with the product of
/// 1/(number of children with an embedding) along the path to it.
fn leaf_weights(node: NodeIx, o: &Ontology, store: &EmbeddingStore) -> Vec<(Vec<f64>, f64)> {
    let children = o.children(node);
    if children.is_empty() {
        return oracle_representative(node, o, store).0.map(|v| (v, 1.0)).into_iter().collect();
    }
    let present: Vec<Vec<(Vec<f64>, f64)>> = children
        .iter()
        .map(|&c| leaf_weights(c, o, store))
        .filter(|leaves| !leaves.is_empty())
        .collect();
    let share = 1.0 / present.len() as f64;
    present.into_iter().flatten().map(|(v, w)| (v, w * share)).collect()
}

/// h_A unrolled into a single weighted sum over leaf representatives.
fn closed_form_average(node: NodeIx, o: &Ontology, store: &EmbeddingStore) -> Option<Vec<f64>> {
    let leaves = leaf_weights(node, o, store);
    let dim = leaves.first()?.0.len();
    let mut acc = vec![0.0; dim];
    for (v, w) in &leaves {
        for i in 0..dim {
            acc[i] += w * v[i];
        }
    }
    Some(acc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_shape_invariants(seed in any::<u64>()) {
        let (o, _) = generated(seed);
        let mut edges = 0;
        for ix in o.node_indices() {
            edges += o.children(ix).len();
            match o.parent(ix) {
                Some(p) => prop_assert_eq!(o.depth(ix), o.depth(p) + 1),
                None => {
                    prop_assert_eq!(ix, o.root());
                    prop_assert_eq!(o.depth(ix), 0);
                }
            }
        }
        prop_assert_eq!(edges, o.node_count() - 1);

        let mut under_root: Vec<&str> = o.descendants_articles(&o.node(o.root()).id).unwrap();
        let mut all: Vec<&str> = o.article_indices().map(|a| o.article(a).id.as_str()).collect();
        under_root.sort_unstable();
        all.sort_unstable();
        prop_assert_eq!(under_root, all);
    }

    #[test]
    fn generated_files_round_trip(seed in any::<u64>()) {
        let s = generate_ontology(&GeneratorConfig::random_small(seed)).unwrap();
        let original = Ontology::from_document(s.ontology.clone()).unwrap();
        let text = serde_json::to_string_pretty(&s.ontology).unwrap();
        let reread = Ontology::from_json(&text).unwrap();
        prop_assert_eq!(original.checksum(), reread.checksum());

        let mut buf = Vec::new();
        s.store.write(&mut buf).unwrap();
        let store = EmbeddingStore::load(buf.as_slice()).unwrap();
        prop_assert_eq!(store.checksum(), s.store.checksum());
    }

    #[test]
    fn average_matches_leaf_weighted_closed_form(seed in any::<u64>()) {
        let (o, store) = generated(seed);
        let index = build_index(&o, &store).unwrap();
        for ix in o.node_indices() {
            let expected = closed_form_average(ix, &o, &store);
            let got = index.node(ix).average.as_ref();
            prop_assert_eq!(expected.is_some(), got.is_some());
            if let (Some(x), Some(y)) = (expected, got) {
                for (a, b) in x.iter().zip(y.iter()) {
                    prop_assert!((a - b).abs() <= 1e-9, "node {}: {} vs {}", o.node(ix).id, a, b);
                }
            }
        }
    }

    #[test]
    fn index_build_is_deterministic(seed in any::<u64>()) {
        let (o, store) = generated(seed);
        let a = build_index(&o, &store).unwrap();
        let b = build_index(&o, &store).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.save(&mut x).unwrap();
        b.save(&mut y).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn captured_node_holds_the_most_confidence(seed in 0u64..500) {
        let inst = common::instance(seed);
        let e = &inst.engine;
        let inference = e.infer(&inst.labels, &Default::default()).unwrap();
        let t = &inference.trickle;
        let total = |n: NodeIx| -> f64 {
            t.assignments.iter().filter(|a| a.resident == n).map(|a| a.label.confidence).sum()
        };
        if !t.assignments.is_empty() {
            let best = t.assignments.iter().map(|a| total(a.resident)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(total(t.captured), best);
        }
        prop_assert!(e.ontology.is_in_subtree(t.captured, t.stop.node));
    }
}
