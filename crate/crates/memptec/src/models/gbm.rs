//! Gradient boosting with logistic loss: shallow regression trees fit to
//! the loss gradients, Newton leaf values, shrinkage per stage.

use super::tree::{grow_regression, Tree};
use super::{log_loss, sigmoid, GbmParams, ModelParams};
use crate::extract::FeatureVector;
use crate::scalar::Scalar;

pub(super) fn train<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    params: &GbmParams,
) -> ModelParams<S> {
    let (base_score, trees, _) = boost(rows, labels, params);
    ModelParams::Gbm {
        base_score,
        learning_rate: S::c(params.learning_rate),
        trees,
    }
}

/// Boosting loop, also returning the per-round training loss trace.
pub(crate) fn boost<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    params: &GbmParams,
) -> (S, Vec<Tree<S>>, Vec<f64>) {
    let n = rows.len();
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let rate = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_score = S::c((rate / (1.0 - rate)).ln());
    let lr = S::c(params.learning_rate);

    let mut score: Vec<S> = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.trees);
    let mut losses = Vec::with_capacity(params.trees + 1);

    let loss_of = |score: &[S]| {
        let proba: Vec<S> = score.iter().map(|&z| sigmoid(z)).collect();
        log_loss(&proba, labels)
    };
    losses.push(loss_of(&score));

    for _round in 0..params.trees {
        let mut grad = vec![0.0f64; n];
        let mut hess = vec![0.0f64; n];
        for i in 0..n {
            let p = sigmoid(score[i]).as_f64();
            grad[i] = labels[i] as f64 - p;
            hess[i] = (p * (1.0 - p)).max(1e-12);
        }
        let tree = grow_regression(rows, &grad, &hess, params.depth, params.min_leaf);
        for (s, row) in score.iter_mut().zip(rows) {
            *s += lr * tree.predict_row(&row.values);
        }
        trees.push(tree);
        losses.push(loss_of(&score));
    }
    (base_score, trees, losses)
}
