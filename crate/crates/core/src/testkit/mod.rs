//! Synthetic fixtures and independent oracles for testing the engine.

pub mod fixture;
pub mod generator;
pub mod oracle;
pub mod rng;

pub use generator::{
    generate_labels, generate_ontology, labels_for_article, GeneratorConfig, GeneratorError, Synthetic,
};
pub use oracle::{oracle_average, oracle_cosine, oracle_greedy_descent, oracle_rank, oracle_representative};
pub use rng::SplitMix64;
