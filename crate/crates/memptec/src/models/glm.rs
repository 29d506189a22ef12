//! Logistic regression with L2 penalty, fit by full-batch gradient descent.

use super::{dot, log_loss, sigmoid, GlmParams, ModelParams};
use crate::extract::FeatureVector;
use crate::scalar::Scalar;

pub(super) fn train<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    valid: Option<(&[FeatureVector<S>], &[u8])>,
    params: &GlmParams,
) -> ModelParams<S> {
    let n_features = rows[0].values.len();
    let n = S::c(rows.len() as f64);
    let lr = S::c(params.learning_rate);
    let l2 = S::c(params.l2);

    let mut weights = vec![S::zero(); n_features];
    let mut bias = S::zero();
    let mut best: Option<(f64, Vec<S>, S)> = None;
    let mut stale = 0usize;

    for _epoch in 0..params.epochs {
        let mut grad_w = vec![S::zero(); n_features];
        let mut grad_b = S::zero();
        for (row, &y) in rows.iter().zip(labels) {
            let p = sigmoid(dot(&weights, &row.values) + bias);
            let err = p - S::c(y as f64);
            for (g, v) in grad_w.iter_mut().zip(&row.values) {
                *g += err * *v;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= lr * (*g / n + l2 * *w);
        }
        bias -= lr * (grad_b / n);

        if let Some((vrows, vlabels)) = valid {
            let proba: Vec<S> = vrows
                .iter()
                .map(|r| sigmoid(dot(&weights, &r.values) + bias))
                .collect();
            let loss = log_loss(&proba, vlabels);
            if best.as_ref().is_none_or(|(b, _, _)| loss < b - 1e-9) {
                best = Some((loss, weights.clone(), bias));
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
    }

    if let Some((_, w, b)) = best {
        weights = w;
        bias = b;
    }
    ModelParams::Glm { weights, bias }
}
