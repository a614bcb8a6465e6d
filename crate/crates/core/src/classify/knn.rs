//! k-nearest-neighbour baseline over squared Euclidean distance.

use super::{argmax, symbol, training_rows, Prediction, RejectionThresholds, TrainingRow};
use crate::error::ClassifyError;
use crate::glyph::{featurize, ink_count, FeatureVector, GlyphSample, CLASS_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    training: Vec<TrainingRow>,
    k: usize,
    thresholds: RejectionThresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnVote {
    pub class: usize,
    /// Winner's share of the k votes.
    pub share: f64,
    pub mean_distance: f64,
    /// Training indices of the neighbours, nearest first.
    pub neighbors: Vec<usize>,
}

impl KnnModel {
    pub fn from_rows(
        training: Vec<TrainingRow>,
        k: usize,
        thresholds: RejectionThresholds,
    ) -> Result<Self, ClassifyError> {
        if training.is_empty() {
            return Err(ClassifyError::EmptyTrainingSet);
        }
        if k == 0 || k > training.len() {
            return Err(ClassifyError::InvalidK {
                k,
                samples: training.len(),
            });
        }
        Ok(Self {
            training,
            k,
            thresholds,
        })
    }

    pub fn training(&self) -> &[TrainingRow] {
        &self.training
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn thresholds(&self) -> RejectionThresholds {
        self.thresholds
    }

    pub fn with_thresholds(mut self, thresholds: RejectionThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    /// The k nearest training rows (distance ties to the earlier index) and
    /// their majority label (ties to the smallest label).
    pub fn vote(&self, fv: &FeatureVector) -> KnnVote {
        let mut ranked: Vec<(u32, usize)> = self
            .training
            .iter()
            .enumerate()
            .map(|(i, r)| (r.features.squared_distance(fv), i))
            .collect();
        let k = self.k;
        if k < ranked.len() {
            ranked.select_nth_unstable(k - 1);
            ranked.truncate(k);
        }
        ranked.sort_unstable();
        let mut votes = [0u32; CLASS_COUNT];
        for &(_, i) in &ranked {
            votes[self.training[i].class as usize] += 1;
        }
        let class = argmax(&votes);
        let total: u64 = ranked.iter().map(|&(d, _)| u64::from(d)).sum();
        KnnVote {
            class,
            share: f64::from(votes[class]) / k as f64,
            mean_distance: total as f64 / k as f64,
            neighbors: ranked.into_iter().map(|(_, i)| i).collect(),
        }
    }
}

/// Keeps the samples in the given order; that order breaks distance ties.
pub fn train_knn(
    samples: &[GlyphSample],
    k: usize,
    thresholds: RejectionThresholds,
) -> Result<KnnModel, ClassifyError> {
    KnnModel::from_rows(training_rows(samples)?, k, thresholds)
}

pub fn knn_predict(model: &KnnModel, g: &GlyphSample) -> Prediction {
    let t = model.thresholds;
    if ink_count(g) < t.t_c {
        return Prediction::RejectedClassA;
    }
    let vote = model.vote(&featurize(g));
    if vote.mean_distance > t.t_s {
        return Prediction::RejectedClassB;
    }
    Prediction::Accepted {
        label: symbol(vote.class),
        confidence: vote.share,
    }
}
