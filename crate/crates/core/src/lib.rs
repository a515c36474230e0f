//! Task inference from scene labels.
//!
//! A weighted label set (the output of any multi-label image classifier) is
//! embedded, trickled down a task ontology by cosine similarity against
//! per-category centroids, and the tasks at the node it lands on are ranked.
//!
//! ```text
//! labels ──filter──▶ centroid ──first-order──▶ stop node ──second-order──▶ captured node ──▶ ranked tasks
//! ```

pub mod checksum;
pub mod embedding;
pub mod engine;
pub mod eval;
pub mod index;
pub mod labels;
pub mod ontology;
pub mod ranking;
pub mod testkit;
pub mod trickle;

pub use embedding::{cosine, weighted_average, EmbeddingStore, Vector};
pub use engine::{Engine, InferOptions, Inference};
pub use index::{build_index, TaskIndex};
pub use labels::{filter_labels, Label, LabelSet};
pub use ontology::{Ontology, OntologyDocument};
pub use ranking::{rank_tasks, StrategyRegistry, TaskSuggestion};
pub use trickle::{first_order_trickle, second_order_trickle, trickle, TrickleResult, TrickleStop};
