#![allow(dead_code)]

use task_trickle::engine::Engine;
use task_trickle::labels::LabelSet;
use task_trickle::ontology::Ontology;
use task_trickle::testkit::{generate_labels, generate_ontology, GeneratorConfig, SplitMix64};

/// One seeded (ontology, embeddings, labels) instance with a built index.
pub struct Instance {
    pub seed: u64,
    pub engine: Engine,
    pub labels: LabelSet,
}

pub fn instance(seed: u64) -> Instance {
    let config = GeneratorConfig::random_small(seed);
    let synthetic = generate_ontology(&config).expect("random_small configs are feasible");
    let ontology = Ontology::from_document(synthetic.ontology).expect("generated ontologies validate");
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37_79B9).wrapping_add(17));
    let labels = generate_labels(&mut rng, &synthetic.tokens, 6);
    let engine = Engine::build(ontology, synthetic.store).expect("titles are in vocabulary");
    Instance { seed, engine, labels }
}

pub fn instances(count: u64) -> impl Iterator<Item = Instance> {
    (0..count).map(instance)
}
