//! Small hand-built sports/music/crafts ontology with a 10-axis embedding
//! table (sport, baseball, pitching, batting, soccer, music, guitar, piano,
//! craft, build).

use crate::embedding::EmbeddingStore;
use crate::labels::LabelSet;
use crate::ontology::Ontology;

pub const ONTOLOGY: &str = include_str!("../../fixtures/sports_music_crafts/ontology.json");
pub const EMBEDDINGS: &str = include_str!("../../fixtures/sports_music_crafts/embeddings.txt");
pub const BASEBALL_LABELS: &str = include_str!("../../fixtures/sports_music_crafts/labels_baseball.json");
pub const GUITAR_LABELS: &str = include_str!("../../fixtures/sports_music_crafts/labels_guitar.json");

pub fn ontology() -> Ontology {
    Ontology::from_json(ONTOLOGY).expect("fixture ontology is valid")
}

pub fn embeddings() -> EmbeddingStore {
    EmbeddingStore::load(EMBEDDINGS.as_bytes()).expect("fixture embeddings are valid")
}

pub fn baseball_labels() -> LabelSet {
    LabelSet::from_json(BASEBALL_LABELS).expect("fixture labels are valid")
}

pub fn guitar_labels() -> LabelSet {
    LabelSet::from_json(GUITAR_LABELS).expect("fixture labels are valid")
}
