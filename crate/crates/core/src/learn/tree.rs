//! CART classification tree with Gini impurity.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Class counts of the (bootstrap) training samples reaching the leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    /// `nodes[0]` is the root.
    nodes: Vec<Node<T>>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub n_classes: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    score: f64,
}

/// Gain below this is treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

impl<T: Scalar> DecisionTree<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Class counts of the leaf that `x` falls into.
    pub fn leaf_counts(&self, x: &[T]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Grows a tree on `samples` (indices into `x`, repeats allowed).
    pub(crate) fn grow<R: Rng>(
        x: &[Vec<T>],
        y: &[usize],
        samples: Vec<usize>,
        p: &GrowParams,
        rng: &mut R,
    ) -> Self {
        let n_features = x[0].len();
        let mut nodes: Vec<Node<T>> = vec![Node::Leaf { counts: Vec::new() }];
        let mut stack = vec![(0usize, samples, 0usize)];

        while let Some((slot, idx, depth)) = stack.pop() {
            let counts = class_counts(&idx, y, p.n_classes);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = p.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || idx.len() < p.min_samples_split {
                nodes[slot] = Node::Leaf { counts };
                continue;
            }

            let mut features = index::sample(rng, n_features, p.max_features).into_vec();
            features.sort_unstable();

            let parent_score = counts.iter().map(|&c| (c as f64).powi(2)).sum::<f64>() / idx.len() as f64;
            match best_split(x, y, &idx, &features, &counts, p) {
                Some(c) if (c.score - parent_score) / idx.len() as f64 > MIN_GAIN => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        idx.iter().partition(|&&i| x[i][c.feature] <= c.threshold);
                    let l = nodes.len();
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes.push(Node::Leaf { counts: Vec::new() });
                    nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: l + 1,
                    };
                    stack.push((l + 1, right, depth + 1));
                    stack.push((l, left, depth + 1));
                }
                _ => nodes[slot] = Node::Leaf { counts },
            }
        }
        Self { nodes }
    }
}

fn class_counts(idx: &[usize], y: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &i in idx {
        counts[y[i]] += 1;
    }
    counts
}

/// Best split over `features` by Gini gain. The score maximized is
/// `sum(l_c^2)/n_l + sum(r_c^2)/n_r`, which orders splits the same way as
/// the weighted child impurity. Ties keep the earliest (feature, threshold).
fn best_split<T: Scalar>(
    x: &[Vec<T>],
    y: &[usize],
    idx: &[usize],
    features: &[usize],
    parent_counts: &[u32],
    p: &GrowParams,
) -> Option<Candidate<T>> {
    let n = idx.len();
    let mut best: Option<Candidate<T>> = None;
    let mut pairs: Vec<(T, usize)> = Vec::with_capacity(n);
    let mut left = vec![0u32; p.n_classes];

    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x[i][f], y[i])));
        pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }

        left.iter_mut().for_each(|c| *c = 0);
        // running sums of squared counts on each side
        let mut left_sq = 0.0f64;
        let mut right_sq: f64 = parent_counts.iter().map(|&c| (c as f64).powi(2)).sum();
        let mut right_counts = parent_counts.to_vec();

        for i in 0..n - 1 {
            let cls = pairs[i].1;
            let (lc, rc) = (left[cls] as f64, right_counts[cls] as f64);
            left_sq += 2.0 * lc + 1.0;
            right_sq -= 2.0 * rc - 1.0;
            left[cls] += 1;
            right_counts[cls] -= 1;

            let (v, next) = (pairs[i].0, pairs[i + 1].0);
            if v == next {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < p.min_samples_leaf || n_right < p.min_samples_leaf {
                continue;
            }
            let score = left_sq / n_left as f64 + right_sq / n_right as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(v, next),
                    score,
                });
            }
        }
    }
    best
}

/// Midpoint of two distinct sorted values that still separates them.
#[inline]
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = lo + (hi - lo) / T::lit(2.0);
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(max_features: usize) -> GrowParams {
        GrowParams {
            n_classes: 3,
            max_features,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }

    #[test]
    fn single_split_on_separable_feature() {
        let x: Vec<Vec<f64>> = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![10.0, 5.0], vec![11.0, 5.0]];
        let y = vec![0, 0, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::grow(&x, &y, (0..4).collect(), &params(2), &mut rng);
        assert_eq!(t.depth(), 1);
        match &t.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 6.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.leaf_counts(&[0.0, 0.0]), &[2, 0, 0]);
        assert_eq!(t.leaf_counts(&[100.0, 0.0]), &[0, 2, 0]);
    }

    #[test]
    fn ties_prefer_lowest_feature_and_threshold() {
        // Both features separate the classes equally well.
        let x: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let y = vec![0, 0, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = DecisionTree::grow(&x, &y, (0..4).collect(), &params(2), &mut rng);
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, threshold, .. } if threshold == 1.5));
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let x: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![1.0]];
        let y = vec![0, 1, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::grow(&x, &y, (0..3).collect(), &params(1), &mut rng);
        assert_eq!(t.nodes(), &[Node::Leaf { counts: vec![1, 1, 1] }]);
    }

    #[test]
    fn bootstrap_duplicates_are_counted() {
        let x: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0]];
        let y = vec![0, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::grow(&x, &y, vec![0, 0, 0], &params(1), &mut rng);
        assert_eq!(t.nodes(), &[Node::Leaf { counts: vec![3, 0, 0] }]);
    }

    #[test]
    fn depth_cap() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GrowParams {
            max_depth: Some(1),
            ..params(1)
        };
        let t = DecisionTree::grow(&x, &y, (0..8).collect(), &p, &mut rng);
        assert!(t.depth() <= 1);
    }

    #[test]
    fn midpoint_of_adjacent_floats_stays_left() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
        assert_eq!(midpoint(1.0f64, 3.0), 2.0);
    }
}
