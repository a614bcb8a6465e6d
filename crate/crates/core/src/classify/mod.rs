//! Glyph classification: a random forest of Gini trees, a kNN baseline, and
//! the two-stage rejection of non-character symbols.
//!
//! Class A symbols carry too little ink and are dropped by a pixel count
//! before any classifier runs. Class B symbols have plenty of ink but look
//! like no character; the forest rejects them on low vote share, kNN on a
//! large mean neighbour distance.

mod forest;
mod io;
mod knn;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use forest::{child_seed, forest_predict, mix64, train_forest, train_forest_serial, ForestModel, ForestVote};
pub use io::{encode_model, load_model, parse_model, save_model};
pub use knn::{knn_predict, train_knn, KnnModel, KnnVote};
pub use tree::{best_split, gini, train_tree, DecisionTree, Node, Split};

use crate::error::{ClassifyError, ConfigError};
use crate::glyph::{class_index, FeatureVector, GlyphSample, ALPHABET, FEATURE_COUNT};

pub const DEFAULT_TREES: usize = 100;
/// floor(sqrt(400))
pub const DEFAULT_FEATURES_PER_SPLIT: usize = 20;
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionThresholds {
    /// Minimum ink count; sparser glyphs are class A.
    pub t_c: u32,
    /// Maximum mean kNN neighbour distance.
    pub t_s: f64,
    /// Minimum forest vote fraction.
    pub p_e: f64,
}

impl Default for RejectionThresholds {
    fn default() -> Self {
        Self {
            t_c: 40,
            t_s: 120.0,
            p_e: 0.35,
        }
    }
}

impl RejectionThresholds {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.t_c as usize > FEATURE_COUNT {
            return Err(ConfigError::Invalid {
                field: "t_c",
                reason: format!("{} exceeds 400", self.t_c),
            });
        }
        if !(self.t_s.is_finite() && self.t_s >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "t_s",
                reason: format!("{} is not a finite nonnegative distance", self.t_s),
            });
        }
        if !(0.0..=1.0).contains(&self.p_e) {
            return Err(ConfigError::Invalid {
                field: "p_e",
                reason: format!("{} is outside [0, 1]", self.p_e),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum Prediction {
    Accepted { label: char, confidence: f64 },
    RejectedClassA,
    RejectedClassB,
}

impl Prediction {
    pub fn label(&self) -> Option<char> {
        match self {
            Prediction::Accepted { label, .. } => Some(*label),
            _ => None,
        }
    }

    pub fn is_rejected(&self) -> bool {
        !matches!(self, Prediction::Accepted { .. })
    }
}

/// A feature vector with its class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingRow {
    pub class: u8,
    pub features: FeatureVector,
}

/// Converts labeled glyphs to training rows, rejecting unlabeled ones.
pub fn training_rows(samples: &[GlyphSample]) -> Result<Vec<TrainingRow>, ClassifyError> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let class = s.label().and_then(class_index).ok_or(ClassifyError::Unlabeled(i))?;
            Ok(TrainingRow {
                class: class as u8,
                features: crate::glyph::featurize(s),
            })
        })
        .collect()
}

/// Index of the largest count; ties go to the smallest index.
pub(crate) fn argmax(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn symbol(class: usize) -> char {
    ALPHABET[class]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Forest,
    Knn,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::Knn => "knn",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forest" | "rf" => Ok(ClassifierKind::Forest),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(ConfigError::Invalid {
                field: "classifier",
                reason: format!("`{other}` is not forest or knn"),
            }),
        }
    }
}

/// Either trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Forest(ForestModel),
    Knn(KnnModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Forest(_) => ClassifierKind::Forest,
            Classifier::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn predict(&self, g: &GlyphSample) -> Prediction {
        match self {
            Classifier::Forest(m) => forest_predict(m, g),
            Classifier::Knn(m) => knn_predict(m, g),
        }
    }

    pub fn thresholds(&self) -> RejectionThresholds {
        match self {
            Classifier::Forest(m) => m.thresholds(),
            Classifier::Knn(m) => m.thresholds(),
        }
    }

    pub fn with_thresholds(self, t: RejectionThresholds) -> Self {
        match self {
            Classifier::Forest(m) => Classifier::Forest(m.with_thresholds(t)),
            Classifier::Knn(m) => Classifier::Knn(m.with_thresholds(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_thresholds_are_valid() {
        assert!(RejectionThresholds::default().validate().is_ok());
        let bad = RejectionThresholds {
            p_e: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RejectionThresholds {
            t_c: 401,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RejectionThresholds {
            t_s: f64::NAN,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1, 3, 3, 0]), 1);
        assert_eq!(argmax(&[0, 0]), 0);
    }

    #[test]
    fn unlabeled_rows_rejected() {
        let g = GlyphSample::from_fn(None, |_, _| false);
        assert!(matches!(training_rows(&[g]), Err(ClassifyError::Unlabeled(0))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("forest".parse::<ClassifierKind>().unwrap(), ClassifierKind::Forest);
        assert_eq!("knn".parse::<ClassifierKind>().unwrap(), ClassifierKind::Knn);
        assert!("svm".parse::<ClassifierKind>().is_err());
    }
}
