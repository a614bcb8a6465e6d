//! Gini decision trees over binary features.
//!
//! Every split tests one feature against 0.5: the left child holds the
//! samples with the feature clear, the right child those with it set.

use rand::Rng;

use super::{argmax, TrainingRow};
use crate::error::ClassifyError;
use crate::glyph::{FeatureVector, CLASS_COUNT, FEATURE_COUNT};

pub type ClassCounts = [u32; CLASS_COUNT];

/// Gini impurity `1 - sum (n_i / N)^2`; zero for an empty count list.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub impurity_decrease: f64,
}

fn sum_squares(counts: &ClassCounts) -> u128 {
    counts.iter().map(|&c| u128::from(c) * u128::from(c)).sum()
}

/// `S_l / n_l + S_r / n_r` as an exact fraction, where `S` is the sum of
/// squared class counts. The weighted child Gini is `1 - purity / n`, so a
/// larger purity is a better split.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: &ClassCounts, n_left: u128, right: &ClassCounts, n_right: u128) -> Self {
        Self {
            num: sum_squares(left) * n_right + sum_squares(right) * n_left,
            den: n_left * n_right,
        }
    }

    fn beats(&self, other: &Self) -> bool {
        self.num * other.den > other.num * self.den
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn class_counts(rows: &[TrainingRow], idx: &[u32]) -> ClassCounts {
    let mut counts = [0u32; CLASS_COUNT];
    for &i in idx {
        counts[rows[i as usize].class as usize] += 1;
    }
    counts
}

/// Best split of the node `idx` among `candidates`, with exact comparison.
fn node_split(
    rows: &[TrainingRow],
    idx: &[u32],
    parent: &ClassCounts,
    candidates: impl IntoIterator<Item = usize>,
) -> Option<(usize, Purity)> {
    let n = idx.len() as u128;
    let parent_purity = Purity {
        num: sum_squares(parent),
        den: n,
    };
    let mut best: Option<(usize, Purity)> = None;
    for f in candidates {
        let mut right = [0u32; CLASS_COUNT];
        let mut n_right = 0u128;
        for &i in idx {
            let row = &rows[i as usize];
            if row.features.get(f) {
                right[row.class as usize] += 1;
                n_right += 1;
            }
        }
        if n_right == 0 || n_right == n {
            continue;
        }
        let mut left = *parent;
        for (l, r) in left.iter_mut().zip(right.iter()) {
            *l -= r;
        }
        let purity = Purity::of(&left, n - n_right, &right, n_right);
        if !purity.beats(&parent_purity) {
            continue;
        }
        best = match best {
            Some((bf, bp)) if bp.beats(&purity) || (!purity.beats(&bp) && bf < f) => Some((bf, bp)),
            _ => Some((f, purity)),
        };
    }
    best
}

/// Feature among `candidates` whose 0/1 partition minimizes weighted child
/// Gini; `None` when no candidate separates the samples with a positive
/// impurity decrease. Ties go to the lowest feature index.
pub fn best_split(rows: &[TrainingRow], candidates: &[usize]) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let idx: Vec<u32> = (0..rows.len() as u32).collect();
    let parent = class_counts(rows, &idx);
    let n = rows.len() as f64;
    node_split(rows, &idx, &parent, candidates.iter().copied()).map(|(feature, purity)| Split {
        feature,
        impurity_decrease: purity.value() / n - sum_squares(&parent) as f64 / (n * n),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// `left` and `right` are node indices in pre-order.
    Split {
        feature: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: ClassCounts,
    },
}

/// Nodes stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Checks the pre-order layout: every split's left child is the next
    /// node, its right child follows the whole left subtree, and the tree
    /// uses every node exactly once.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        fn walk(nodes: &[Node], at: usize) -> Result<usize, String> {
            match nodes.get(at) {
                None => Err(format!("node {at} is missing")),
                Some(Node::Leaf { counts }) => {
                    if counts.iter().all(|&c| c == 0) {
                        Err(format!("leaf {at} has no samples"))
                    } else {
                        Ok(at + 1)
                    }
                }
                Some(Node::Split { feature, left, right }) => {
                    if *feature >= FEATURE_COUNT {
                        return Err(format!("node {at} tests feature {feature}"));
                    }
                    if *left != at + 1 {
                        return Err(format!("node {at}: left child {left} is not {}", at + 1));
                    }
                    let after_left = walk(nodes, *left)?;
                    if *right != after_left {
                        return Err(format!("node {at}: right child {right} is not {after_left}"));
                    }
                    walk(nodes, *right)
                }
            }
        }
        let end = walk(&nodes, 0)?;
        if end != nodes.len() {
            return Err(format!("{} nodes are unreachable", nodes.len() - end));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_counts(&self, fv: &FeatureVector) -> &ClassCounts {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, left, right } => {
                    at = if fv.get(*feature) { *right } else { *left };
                }
            }
        }
    }

    /// Majority class of the reached leaf (ties: smallest label).
    pub fn predict_class(&self, fv: &FeatureVector) -> usize {
        argmax(self.leaf_counts(fv))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Draws candidate features in batches of `f_s` from a lazily shuffled
/// permutation of all features until one batch yields a split.
fn choose_split<R: Rng + ?Sized>(
    rows: &[TrainingRow],
    idx: &[u32],
    parent: &ClassCounts,
    rng: &mut R,
    f_s: usize,
) -> Option<usize> {
    let mut perm: [u16; FEATURE_COUNT] = std::array::from_fn(|i| i as u16);
    let mut pos = 0;
    while pos < FEATURE_COUNT {
        let end = (pos + f_s).min(FEATURE_COUNT);
        for k in pos..end {
            let j = rng.random_range(k..FEATURE_COUNT);
            perm.swap(k, j);
        }
        let batch = perm[pos..end].iter().map(|&f| usize::from(f));
        if let Some((feature, _)) = node_split(rows, idx, parent, batch) {
            return Some(feature);
        }
        pos = end;
    }
    None
}

/// Grows a tree to purity. Given the same rng stream the result is a pure
/// function of `rows`.
pub fn train_tree<R: Rng + ?Sized>(
    rows: &[TrainingRow],
    rng: &mut R,
    f_s: usize,
) -> Result<DecisionTree, ClassifyError> {
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if f_s == 0 || f_s > FEATURE_COUNT {
        return Err(ClassifyError::InvalidFeatureCount(f_s));
    }
    struct Pending {
        lo: usize,
        hi: usize,
        patch_right_of: Option<usize>,
    }
    let mut idx: Vec<u32> = (0..rows.len() as u32).collect();
    let mut scratch: Vec<u32> = Vec::with_capacity(rows.len());
    let mut nodes: Vec<Node> = Vec::new();
    let mut stack = vec![Pending {
        lo: 0,
        hi: rows.len(),
        patch_right_of: None,
    }];
    while let Some(p) = stack.pop() {
        let me = nodes.len();
        if let Some(parent) = p.patch_right_of {
            if let Node::Split { right, .. } = &mut nodes[parent] {
                *right = me;
            }
        }
        let node_idx = &idx[p.lo..p.hi];
        let counts = class_counts(rows, node_idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let feature = if pure || node_idx.len() < 2 {
            None
        } else {
            choose_split(rows, node_idx, &counts, rng, f_s)
        };
        let Some(feature) = feature else {
            nodes.push(Node::Leaf { counts });
            continue;
        };
        // stable partition: feature clear first
        scratch.clear();
        scratch.extend(node_idx.iter().filter(|&&i| !rows[i as usize].features.get(feature)));
        let mid = p.lo + scratch.len();
        scratch.extend(node_idx.iter().filter(|&&i| rows[i as usize].features.get(feature)));
        idx[p.lo..p.hi].copy_from_slice(&scratch);
        nodes.push(Node::Split {
            feature,
            left: me + 1,
            right: 0,
        });
        stack.push(Pending {
            lo: mid,
            hi: p.hi,
            patch_right_of: Some(me),
        });
        stack.push(Pending {
            lo: p.lo,
            hi: mid,
            patch_right_of: None,
        });
    }
    Ok(DecisionTree { nodes })
}
