//! Binary decision trees shared by the boosted and forest ensembles.
//!
//! Splits are exact greedy over sorted unique values with midpoint
//! thresholds; ties resolve to the lowest feature index, then the lowest
//! threshold, so trees are deterministic for a given input order.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<S> {
    Leaf {
        value: S,
    },
    Split {
        feature: usize,
        threshold: S,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<S> {
    pub nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tree<S> {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn predict_row(&self, row: &[S]) -> S {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

struct Candidate<S> {
    feature: usize,
    threshold: S,
    gain: f64,
}

/// Scan one feature for the best squared-error split of the gradient sums.
/// Returns the gain over the unsplit node.
fn best_regression_split<S: Scalar>(
    rows: &[FeatureVector<S>],
    idx: &[u32],
    feature: usize,
    grad: &[f64],
    min_leaf: usize,
) -> Option<(S, f64)> {
    let mut pairs: Vec<(S, f64)> = idx
        .iter()
        .map(|&i| (rows[i as usize].values[feature], grad[i as usize]))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let total: f64 = pairs.iter().map(|(_, g)| g).sum();
    let n = pairs.len() as f64;
    let parent = total * total / n;

    let mut best: Option<(S, f64)> = None;
    let mut left_sum = 0.0;
    let mut left_n = 0usize;
    for w in 0..pairs.len() - 1 {
        left_sum += pairs[w].1;
        left_n += 1;
        if pairs[w].0 == pairs[w + 1].0 {
            continue;
        }
        if left_n < min_leaf || pairs.len() - left_n < min_leaf {
            continue;
        }
        let right_sum = total - left_sum;
        let right_n = n - left_n as f64;
        let gain = left_sum * left_sum / left_n as f64 + right_sum * right_sum / right_n - parent;
        let threshold = midpoint(pairs[w].0, pairs[w + 1].0);
        if best.as_ref().is_none_or(|(_, g)| gain > *g) {
            best = Some((threshold, gain));
        }
    }
    best
}

fn midpoint<S: Scalar>(a: S, b: S) -> S {
    let m = (a + b) / S::c(2.0);
    // Guard against midpoints that round onto the upper value.
    if m >= b {
        a
    } else {
        m
    }
}

/// Regression tree on per-row gradients with Newton leaf values
/// `Σg / (Σh + ε)`, used as one boosting stage.
pub fn grow_regression<S: Scalar>(
    rows: &[FeatureVector<S>],
    grad: &[f64],
    hess: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Tree<S> {
    let idx: Vec<u32> = (0..rows.len() as u32).collect();
    let mut tree = Tree { nodes: Vec::new() };
    grow_regression_node(rows, idx, grad, hess, max_depth, min_leaf, &mut tree);
    tree
}

fn newton_leaf<S: Scalar>(idx: &[u32], grad: &[f64], hess: &[f64]) -> Node<S> {
    let g: f64 = idx.iter().map(|&i| grad[i as usize]).sum();
    let h: f64 = idx.iter().map(|&i| hess[i as usize]).sum();
    Node::Leaf {
        value: S::c(g / (h + 1e-12)),
    }
}

fn grow_regression_node<S: Scalar>(
    rows: &[FeatureVector<S>],
    idx: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    depth: usize,
    min_leaf: usize,
    tree: &mut Tree<S>,
) -> u32 {
    let at = tree.nodes.len() as u32;
    if depth == 0 || idx.len() < 2 * min_leaf {
        tree.nodes.push(newton_leaf(&idx, grad, hess));
        return at;
    }
    let n_features = rows[0].values.len();
    let mut best: Option<Candidate<S>> = None;
    for feature in 0..n_features {
        if let Some((threshold, gain)) = best_regression_split(rows, &idx, feature, grad, min_leaf)
        {
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    let Some(split) = best else {
        tree.nodes.push(newton_leaf(&idx, grad, hess));
        return at;
    };

    tree.nodes.push(Node::Leaf { value: S::zero() }); // placeholder
    let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = idx
        .iter()
        .partition(|&&i| rows[i as usize].values[split.feature] <= split.threshold);
    let left = grow_regression_node(rows, left_idx, grad, hess, depth - 1, min_leaf, tree);
    let right = grow_regression_node(rows, right_idx, grad, hess, depth - 1, min_leaf, tree);
    tree.nodes[at as usize] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

/// Classification tree on Gini impurity with per-split feature sampling,
/// used by the random forest. Leaves hold the malicious-class fraction.
pub fn grow_gini<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    idx: Vec<u32>,
    max_depth: usize,
    min_split: usize,
    features_per_split: usize,
    rng: &mut ChaCha8Rng,
) -> Tree<S> {
    let mut tree = Tree { nodes: Vec::new() };
    grow_gini_node(
        rows,
        labels,
        idx,
        max_depth,
        min_split,
        features_per_split,
        rng,
        &mut tree,
    );
    tree
}

fn class_fraction<S: Scalar>(idx: &[u32], labels: &[u8]) -> Node<S> {
    let ones = idx.iter().filter(|&&i| labels[i as usize] == 1).count();
    Node::Leaf {
        value: S::c(ones as f64 / idx.len() as f64),
    }
}

fn best_gini_split<S: Scalar>(
    rows: &[FeatureVector<S>],
    idx: &[u32],
    feature: usize,
    labels: &[u8],
) -> Option<(S, f64)> {
    let mut pairs: Vec<(S, u8)> = idx
        .iter()
        .map(|&i| (rows[i as usize].values[feature], labels[i as usize]))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n = pairs.len() as f64;
    let total_ones = pairs.iter().filter(|(_, l)| *l == 1).count() as f64;
    let gini = |ones: f64, count: f64| {
        if count == 0.0 {
            0.0
        } else {
            let p = ones / count;
            2.0 * p * (1.0 - p)
        }
    };
    let parent = gini(total_ones, n);

    let mut best: Option<(S, f64)> = None;
    let mut left_ones = 0.0;
    for w in 0..pairs.len() - 1 {
        if pairs[w].1 == 1 {
            left_ones += 1.0;
        }
        let left_n = (w + 1) as f64;
        if pairs[w].0 == pairs[w + 1].0 {
            continue;
        }
        let right_n = n - left_n;
        let weighted = (left_n / n) * gini(left_ones, left_n)
            + (right_n / n) * gini(total_ones - left_ones, right_n);
        let gain = parent - weighted;
        let threshold = midpoint(pairs[w].0, pairs[w + 1].0);
        if best.as_ref().is_none_or(|(_, g)| gain > *g) {
            best = Some((threshold, gain));
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn grow_gini_node<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    idx: Vec<u32>,
    depth: usize,
    min_split: usize,
    features_per_split: usize,
    rng: &mut ChaCha8Rng,
    tree: &mut Tree<S>,
) -> u32 {
    let at = tree.nodes.len() as u32;
    let ones = idx.iter().filter(|&&i| labels[i as usize] == 1).count();
    if depth == 0 || idx.len() < min_split || ones == 0 || ones == idx.len() {
        tree.nodes.push(class_fraction(&idx, labels));
        return at;
    }

    let n_features = rows[0].values.len();
    let mut sampled: Vec<usize> = (0..n_features).collect();
    sampled.shuffle(rng);
    sampled.truncate(features_per_split.min(n_features));
    sampled.sort_unstable(); // lowest-feature tie-break despite sampling order

    let mut best: Option<Candidate<S>> = None;
    for &feature in &sampled {
        if let Some((threshold, gain)) = best_gini_split(rows, &idx, feature, labels) {
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    let Some(split) = best else {
        tree.nodes.push(class_fraction(&idx, labels));
        return at;
    };

    tree.nodes.push(Node::Leaf { value: S::zero() });
    let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = idx
        .iter()
        .partition(|&&i| rows[i as usize].values[split.feature] <= split.threshold);
    let left = grow_gini_node(
        rows,
        labels,
        left_idx,
        depth - 1,
        min_split,
        features_per_split,
        rng,
        tree,
    );
    let right = grow_gini_node(
        rows,
        labels,
        right_idx,
        depth - 1,
        min_split,
        features_per_split,
        rng,
        tree,
    );
    tree.nodes[at as usize] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}
