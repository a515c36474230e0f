//! Classifier output ingestion and redundancy filtering.
//!
//! A label file is either a bare JSON list of `{text, confidence}` objects or
//! an object `{"source": ..., "labels": [...]}`.

use std::cmp::Ordering;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine_unchecked, EmbeddingStore, Vector};

pub const DEFAULT_FLOOR: f64 = 0.1;
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("malformed label document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("label document contains no labels")]
    Empty,
    #[error("label {text:?} has confidence {confidence} outside (0, 1]")]
    ConfidenceRange { text: String, confidence: f64 },
    #[error("label with empty text")]
    EmptyText,
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
    #[error("every label was removed by filtering ({below_floor} below floor, {out_of_vocabulary} out of vocabulary, {redundant} redundant)")]
    EmptyAfterFilter {
        below_floor: usize,
        out_of_vocabulary: usize,
        redundant: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelDocument {
    List(Vec<Label>),
    Tagged {
        #[serde(default)]
        source: Option<String>,
        labels: Vec<Label>,
    },
}

/// Labels sorted by descending confidence, ties by text ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    labels: Vec<Label>,
    pub source: Option<String>,
}

fn label_order(a: &Label, b: &Label) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.text.cmp(&b.text))
}

impl LabelSet {
    /// Validates and sorts `labels`.
    pub fn new(labels: Vec<Label>, source: Option<String>) -> Result<Self, LabelError> {
        if labels.is_empty() {
            return Err(LabelError::Empty);
        }
        for l in &labels {
            if l.text.trim().is_empty() {
                return Err(LabelError::EmptyText);
            }
            if !(l.confidence > 0.0 && l.confidence <= 1.0) {
                return Err(LabelError::ConfidenceRange {
                    text: l.text.clone(),
                    confidence: l.confidence,
                });
            }
        }
        let mut labels = labels;
        labels.sort_by(label_order);
        Ok(Self { labels, source })
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self, LabelError> {
        let doc: LabelDocument = serde_json::from_reader(reader)?;
        match doc {
            LabelDocument::List(labels) => Self::new(labels, None),
            LabelDocument::Tagged { source, labels } => Self::new(labels, source),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LabelError> {
        Self::parse(text.as_bytes())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same labels with every confidence multiplied by `factor`. The result
    /// may leave `(0, 1]`; it exists for invariance checks on the weighting.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            labels: self
                .labels
                .iter()
                .map(|l| Label {
                    text: l.text.clone(),
                    confidence: l.confidence * factor,
                })
                .collect(),
            source: self.source.clone(),
        }
    }
}

/// A label that survived filtering, with its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedLabel {
    pub label: Label,
    pub vector: Vector,
}

/// Drops labels below `floor`, labels with no in-vocabulary token, and
/// labels whose embedding is within `dedup_threshold` cosine of a
/// higher-confidence label already kept.
pub fn filter_labels(
    labels: &LabelSet,
    store: &EmbeddingStore,
    floor: f64,
    dedup_threshold: f64,
) -> Result<Vec<EmbeddedLabel>, LabelError> {
    if !(0.0..1.0).contains(&floor) {
        return Err(LabelError::InvalidParameter(format!(
            "floor must be in [0, 1), got {floor}"
        )));
    }
    if !(dedup_threshold > 0.0 && dedup_threshold <= 1.0) {
        return Err(LabelError::InvalidParameter(format!(
            "dedup threshold must be in (0, 1], got {dedup_threshold}"
        )));
    }
    let (mut below_floor, mut out_of_vocabulary, mut redundant) = (0, 0, 0);
    let mut kept: Vec<EmbeddedLabel> = Vec::new();
    for label in labels.labels() {
        if label.confidence < floor {
            below_floor += 1;
            continue;
        }
        let Some(vector) = store.embed_text(&label.text) else {
            out_of_vocabulary += 1;
            continue;
        };
        if kept
            .iter()
            .any(|k| cosine_unchecked(&k.vector, &vector) >= dedup_threshold)
        {
            redundant += 1;
            continue;
        }
        kept.push(EmbeddedLabel {
            label: label.clone(),
            vector,
        });
    }
    if kept.is_empty() {
        return Err(LabelError::EmptyAfterFilter {
            below_floor,
            out_of_vocabulary,
            redundant,
        });
    }
    Ok(kept)
}

/// [`filter_labels`] returning a plain [`LabelSet`].
pub fn filter_label_set(
    labels: &LabelSet,
    store: &EmbeddingStore,
    floor: f64,
    dedup_threshold: f64,
) -> Result<LabelSet, LabelError> {
    let kept = filter_labels(labels, store, floor, dedup_threshold)?;
    Ok(LabelSet {
        labels: kept.into_iter().map(|k| k.label).collect(),
        source: labels.source.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store() -> EmbeddingStore {
        EmbeddingStore::load(
            "4 2\nbaseball 1 0\nball 1 0\nmound 0 1\nbat 0.7 0.7\n".as_bytes(),
        )
        .unwrap()
    }

    fn set(pairs: &[(&str, f64)]) -> LabelSet {
        LabelSet::new(
            pairs
                .iter()
                .map(|(t, c)| Label {
                    text: t.to_string(),
                    confidence: *c,
                })
                .collect(),
            None,
        )
        .unwrap()
    }

    fn texts(s: &LabelSet) -> Vec<&str> {
        s.labels().iter().map(|l| l.text.as_str()).collect()
    }

    #[test]
    fn parse_sorts_by_confidence() {
        let s = LabelSet::from_json(
            r#"[{"text": "mound", "confidence": 0.5}, {"text": "baseball", "confidence": 0.9}]"#,
        )
        .unwrap();
        assert_eq!(texts(&s), ["baseball", "mound"]);
        assert_eq!(s.source, None);

        let s = LabelSet::from_json(
            r#"{"source": "inception", "labels": [
                {"text": "b", "confidence": 0.5}, {"text": "a", "confidence": 0.5}]}"#,
        )
        .unwrap();
        assert_eq!(texts(&s), ["a", "b"]);
        assert_eq!(s.source.as_deref(), Some("inception"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            LabelSet::from_json(r#"[{"text": "x", "confidence": 1.5}]"#),
            Err(LabelError::ConfidenceRange { .. })
        ));
        assert!(matches!(
            LabelSet::from_json(r#"[{"text": "x", "confidence": 0.0}]"#),
            Err(LabelError::ConfidenceRange { .. })
        ));
        assert!(matches!(LabelSet::from_json("[]"), Err(LabelError::Empty)));
        assert!(matches!(
            LabelSet::from_json(r#"[{"text": " ", "confidence": 0.3}]"#),
            Err(LabelError::EmptyText)
        ));
        assert!(matches!(
            LabelSet::from_json(r#"[{"text": "x"}]"#),
            Err(LabelError::Parse(_))
        ));
    }

    #[test]
    fn floor_cut() {
        let out = filter_label_set(&set(&[("baseball", 0.9), ("mound", 0.05)]), &store(), 0.1, 0.95)
            .unwrap();
        assert_eq!(texts(&out), ["baseball"]);
    }

    #[test]
    fn identical_embeddings_keep_higher_confidence() {
        let out = filter_label_set(&set(&[("ball", 0.4), ("baseball", 0.8)]), &store(), 0.1, 0.95)
            .unwrap();
        assert_eq!(texts(&out), ["baseball"]);
    }

    #[test]
    fn orthogonal_embeddings_both_kept() {
        let out = filter_label_set(&set(&[("baseball", 0.8), ("mound", 0.4)]), &store(), 0.1, 0.95)
            .unwrap();
        assert_eq!(texts(&out), ["baseball", "mound"]);
    }

    #[test]
    fn out_of_vocabulary_dropped_and_empty_result_is_an_error() {
        let out = filter_label_set(&set(&[("zebra", 0.9), ("mound", 0.4)]), &store(), 0.1, 0.95)
            .unwrap();
        assert_eq!(texts(&out), ["mound"]);
        let err = filter_labels(&set(&[("zebra", 0.9), ("mound", 0.05)]), &store(), 0.1, 0.95)
            .unwrap_err();
        assert!(matches!(
            err,
            LabelError::EmptyAfterFilter {
                below_floor: 1,
                out_of_vocabulary: 1,
                redundant: 0
            }
        ));
    }

    #[test]
    fn parameters_validated() {
        let s = set(&[("baseball", 0.9)]);
        assert!(filter_labels(&s, &store(), 1.0, 0.95).is_err());
        assert!(filter_labels(&s, &store(), 0.1, 0.0).is_err());
    }

    fn label_sets() -> impl Strategy<Value = LabelSet> {
        let words = prop::sample::select(vec!["baseball", "ball", "mound", "bat", "zebra", "bat mound"]);
        proptest::collection::vec((words, 0.01f64..=1.0), 1..8).prop_map(|pairs| {
            LabelSet::new(
                pairs
                    .into_iter()
                    .map(|(t, c)| Label {
                        text: t.to_string(),
                        confidence: c,
                    })
                    .collect(),
                None,
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn filtering_is_idempotent(s in label_sets(), floor in 0.0f64..0.5, dedup in 0.5f64..=1.0) {
            if let Ok(once) = filter_label_set(&s, &store(), floor, dedup) {
                let twice = filter_label_set(&once, &store(), floor, dedup).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn output_is_subsequence(s in label_sets(), floor in 0.0f64..0.5, dedup in 0.5f64..=1.0) {
            if let Ok(out) = filter_label_set(&s, &store(), floor, dedup) {
                let mut it = s.labels().iter();
                for kept in out.labels() {
                    prop_assert!(it.any(|l| l == kept));
                }
            }
        }

        #[test]
        fn permissive_filter_is_identity(s in label_sets()) {
            // Drop the OOV word so every label is in vocabulary, and keep texts distinct.
            let labels: Vec<Label> = s.labels().iter().filter(|l| l.text != "zebra").cloned().collect();
            let mut seen = std::collections::HashSet::new();
            let labels: Vec<Label> = labels.into_iter().filter(|l| seen.insert(l.text.clone())).collect();
            prop_assume!(!labels.is_empty());
            let s = LabelSet::new(labels, None).unwrap();
            // ball and baseball embed identically; cosine 1 >= 1 still dedups them.
            prop_assume!(!(texts(&s).contains(&"ball") && texts(&s).contains(&"baseball")));
            let out = filter_label_set(&s, &store(), 0.0, 1.0).unwrap();
            prop_assert_eq!(out, s);
        }
    }
}
