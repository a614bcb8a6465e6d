//! Bagged random forest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{train_tree, DecisionTree};
use super::{argmax, symbol, training_rows, Prediction, RejectionThresholds, TrainingRow};
use crate::error::ClassifyError;
use crate::glyph::{featurize, ink_count, FeatureVector, GlyphSample, CLASS_COUNT, FEATURE_COUNT};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// The splitmix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of tree `i`, independent of training order or thread count.
pub fn child_seed(seed: u64, i: usize) -> u64 {
    mix64(seed ^ GOLDEN_GAMMA.wrapping_mul(i as u64 + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    f_s: usize,
    seed: u64,
    thresholds: RejectionThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestVote {
    pub class: usize,
    pub votes: u32,
    /// `votes / n_t`
    pub fraction: f64,
}

impl ForestModel {
    pub fn from_parts(
        trees: Vec<DecisionTree>,
        f_s: usize,
        seed: u64,
        thresholds: RejectionThresholds,
    ) -> Result<Self, ClassifyError> {
        if trees.is_empty() {
            return Err(ClassifyError::NoTrees);
        }
        if f_s == 0 || f_s > FEATURE_COUNT {
            return Err(ClassifyError::InvalidFeatureCount(f_s));
        }
        Ok(Self {
            trees,
            f_s,
            seed,
            thresholds,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_t(&self) -> usize {
        self.trees.len()
    }

    pub fn f_s(&self) -> usize {
        self.f_s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn thresholds(&self) -> RejectionThresholds {
        self.thresholds
    }

    pub fn with_thresholds(mut self, thresholds: RejectionThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn votes(&self, fv: &FeatureVector) -> [u32; CLASS_COUNT] {
        let mut votes = [0u32; CLASS_COUNT];
        for t in &self.trees {
            votes[t.predict_class(fv)] += 1;
        }
        votes
    }

    /// Plurality vote, ties to the smallest label.
    pub fn vote(&self, fv: &FeatureVector) -> ForestVote {
        let votes = self.votes(fv);
        let class = argmax(&votes);
        ForestVote {
            class,
            votes: votes[class],
            fraction: f64::from(votes[class]) / self.trees.len() as f64,
        }
    }
}

fn prepare(samples: &[GlyphSample], n_t: usize, f_s: usize) -> Result<Vec<TrainingRow>, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if n_t == 0 {
        return Err(ClassifyError::NoTrees);
    }
    if f_s == 0 || f_s > FEATURE_COUNT {
        return Err(ClassifyError::InvalidFeatureCount(f_s));
    }
    let mut rows = training_rows(samples)?;
    let mut present = [false; CLASS_COUNT];
    for r in &rows {
        present[r.class as usize] = true;
    }
    let classes = present.iter().filter(|&&p| p).count();
    if classes < 2 {
        return Err(ClassifyError::SingleClass(classes));
    }
    // bootstrap indices refer to this order, so input order does not matter
    rows.sort_unstable();
    Ok(rows)
}

fn grow(rows: &[TrainingRow], f_s: usize, seed: u64, i: usize) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i));
    let n = rows.len();
    let bag: Vec<TrainingRow> = (0..n).map(|_| rows[rng.random_range(0..n)]).collect();
    train_tree(&bag, &mut rng, f_s).expect("bootstrap sample is nonempty and f_s was checked")
}

/// Trains `n_t` trees in parallel. Output is identical to
/// [`train_forest_serial`].
pub fn train_forest(
    samples: &[GlyphSample],
    n_t: usize,
    f_s: usize,
    seed: u64,
    thresholds: RejectionThresholds,
) -> Result<ForestModel, ClassifyError> {
    let rows = prepare(samples, n_t, f_s)?;
    let trees = (0..n_t).into_par_iter().map(|i| grow(&rows, f_s, seed, i)).collect();
    ForestModel::from_parts(trees, f_s, seed, thresholds)
}

pub fn train_forest_serial(
    samples: &[GlyphSample],
    n_t: usize,
    f_s: usize,
    seed: u64,
    thresholds: RejectionThresholds,
) -> Result<ForestModel, ClassifyError> {
    let rows = prepare(samples, n_t, f_s)?;
    let trees = (0..n_t).map(|i| grow(&rows, f_s, seed, i)).collect();
    ForestModel::from_parts(trees, f_s, seed, thresholds)
}

pub fn forest_predict(model: &ForestModel, g: &GlyphSample) -> Prediction {
    let t = model.thresholds;
    if ink_count(g) < t.t_c {
        return Prediction::RejectedClassA;
    }
    let vote = model.vote(&featurize(g));
    if vote.fraction < t.p_e {
        return Prediction::RejectedClassB;
    }
    Prediction::Accepted {
        label: symbol(vote.class),
        confidence: vote.fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::tree::Node;
    use crate::glyph::class_index;

    fn toy_samples(seed: u64, per_class: usize, labels: &[char]) -> Vec<GlyphSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for (k, &label) in labels.iter().enumerate() {
            for _ in 0..per_class {
                // class k owns a 3-row stripe plus noise
                out.push(GlyphSample::from_fn(Some(label), |_, y| {
                    (y / 3 == k) ^ rng.random_bool(0.05)
                }));
            }
        }
        out
    }

    fn leaf(class: char, n: u32) -> Node {
        let mut counts = [0u32; CLASS_COUNT];
        counts[class_index(class).unwrap()] = n;
        Node::Leaf { counts }
    }

    fn stump(feature: usize, clear: char, set: char) -> DecisionTree {
        DecisionTree::from_nodes(vec![
            Node::Split {
                feature,
                left: 1,
                right: 2,
            },
            leaf(clear, 3),
            leaf(set, 3),
        ])
        .unwrap()
    }

    fn dense(label: Option<char>) -> GlyphSample {
        GlyphSample::from_fn(label, |x, _| x < 10)
    }

    #[test]
    fn mix64_reference_values() {
        // splitmix64 stream from state 0: first outputs of the reference generator
        assert_eq!(mix64(GOLDEN_GAMMA), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(GOLDEN_GAMMA.wrapping_mul(2)), 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(child_seed(0, 0), 0xe220_a839_7b1d_cdaf);
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
    }

    #[test]
    fn hand_counted_votes() {
        // cell (0,0) is set in `dense`, so each stump answers its right leaf
        let trees = vec![stump(0, 'B', 'A'), stump(0, 'B', 'A'), stump(0, 'A', 'B')];
        let m = ForestModel::from_parts(
            trees,
            20,
            0,
            RejectionThresholds {
                p_e: 0.6,
                ..Default::default()
            },
        )
        .unwrap();
        match forest_predict(&m, &dense(None)) {
            Prediction::Accepted { label, confidence } => {
                assert_eq!(label, 'A');
                assert!((confidence - 2.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let strict = m.clone().with_thresholds(RejectionThresholds {
            p_e: 0.7,
            ..Default::default()
        });
        assert_eq!(forest_predict(&strict, &dense(None)), Prediction::RejectedClassB);
    }

    #[test]
    fn unanimous_and_vote_ties() {
        let trees = vec![stump(0, 'C', 'C'); 4];
        let m = ForestModel::from_parts(trees, 20, 0, RejectionThresholds::default()).unwrap();
        assert_eq!(
            forest_predict(&m, &dense(None)),
            Prediction::Accepted {
                label: 'C',
                confidence: 1.0
            }
        );
        let tied = vec![stump(0, 'Z', 'Z'), stump(0, '7', '7')];
        let m = ForestModel::from_parts(tied, 20, 0, RejectionThresholds::default()).unwrap();
        assert_eq!(forest_predict(&m, &dense(None)).label(), Some('7'));
    }

    #[test]
    fn sparse_glyph_is_class_a() {
        let m = ForestModel::from_parts(vec![stump(0, 'A', 'B')], 20, 0, RejectionThresholds::default()).unwrap();
        let blank = GlyphSample::from_fn(None, |_, _| false);
        assert_eq!(forest_predict(&m, &blank), Prediction::RejectedClassA);
        let full = GlyphSample::from_fn(None, |_, _| true);
        assert!(!forest_predict(&m, &full).is_rejected());
    }

    #[test]
    fn serial_and_parallel_agree() {
        let samples = toy_samples(1, 8, &['0', 'A', 'K', 'Z']);
        let t = RejectionThresholds::default();
        let a = train_forest(&samples, 12, 20, 77, t).unwrap();
        let b = train_forest_serial(&samples, 12, 20, 77, t).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&samples, 12, 20, 78, t).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn input_order_does_not_matter() {
        let samples = toy_samples(2, 6, &['1', '2', '3']);
        let mut reversed = samples.clone();
        reversed.reverse();
        let t = RejectionThresholds::default();
        assert_eq!(
            train_forest(&samples, 5, 20, 3, t).unwrap(),
            train_forest(&reversed, 5, 20, 3, t).unwrap()
        );
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let samples = toy_samples(3, 6, &['P', 'Q']);
        let m = train_forest(
            &samples,
            1,
            20,
            5,
            RejectionThresholds {
                t_c: 0,
                p_e: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let tree = &m.trees()[0];
        for s in toy_samples(4, 5, &['P', 'Q']) {
            let want = symbol(tree.predict_class(&featurize(&s)));
            assert_eq!(
                forest_predict(&m, &s),
                Prediction::Accepted {
                    label: want,
                    confidence: 1.0
                }
            );
        }
    }

    #[test]
    fn learns_separable_classes() {
        let labels = ['0', '5', 'A', 'M', 'X', 'Z'];
        let train = toy_samples(5, 20, &labels);
        let m = train_forest(
            &train,
            30,
            20,
            1,
            RejectionThresholds {
                t_c: 0,
                p_e: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let test = toy_samples(6, 10, &labels);
        let right = test
            .iter()
            .filter(|s| forest_predict(&m, s).label() == s.label())
            .count();
        assert!(right >= 58, "{right}/60");
    }

    #[test]
    fn vote_fractions_sum_to_one() {
        let samples = toy_samples(7, 6, &['B', 'D', 'E']);
        let m = train_forest(&samples, 9, 20, 2, RejectionThresholds::default()).unwrap();
        for s in toy_samples(8, 3, &['B', 'D', 'E']) {
            let v = m.votes(&featurize(&s));
            assert_eq!(v.iter().sum::<u32>(), 9);
        }
    }

    #[test]
    fn training_errors() {
        let t = RejectionThresholds::default();
        assert!(matches!(
            train_forest(&[], 5, 20, 0, t),
            Err(ClassifyError::EmptyTrainingSet)
        ));
        let one = toy_samples(0, 4, &['A']);
        assert!(matches!(
            train_forest(&one, 5, 20, 0, t),
            Err(ClassifyError::SingleClass(1))
        ));
        let two = toy_samples(0, 4, &['A', 'B']);
        assert!(matches!(train_forest(&two, 0, 20, 0, t), Err(ClassifyError::NoTrees)));
        assert!(matches!(
            train_forest(&two, 5, 401, 0, t),
            Err(ClassifyError::InvalidFeatureCount(401))
        ));
    }
}
