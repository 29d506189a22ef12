//! Linear SVM: hinge loss with L2, fit by seeded stochastic subgradient
//! descent (Pegasos-style schedule). Probability output comes from a
//! logistic calibration fit on validation scores (training scores when no
//! validation data is given).

use rand::seq::SliceRandom;

use super::{dot, ModelParams, SvmParams};
use crate::extract::FeatureVector;
use crate::scalar::Scalar;
use crate::seeding::rng_for;

pub(super) fn train<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    valid: Option<(&[FeatureVector<S>], &[u8])>,
    params: &SvmParams,
    seed: u64,
) -> ModelParams<S> {
    let n_features = rows[0].values.len();
    let n = rows.len();
    let lambda = 1.0 / (params.c * n as f64);

    let mut weights = vec![S::zero(); n_features];
    let mut bias = S::zero();
    let mut t: u64 = 0;

    for epoch in 0..params.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(seed, "svm-epoch", epoch as u64));
        for i in order {
            t += 1;
            let eta = S::c(1.0 / (lambda * t as f64));
            let shrink = S::one() - eta * S::c(lambda);
            let y = if labels[i] == 1 { S::one() } else { -S::one() };
            let margin = y * (dot(&weights, &rows[i].values) + bias);
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if margin < S::one() {
                for (w, v) in weights.iter_mut().zip(&rows[i].values) {
                    *w += eta * y * *v;
                }
                bias += eta * y;
            }
        }
    }

    // Calibration scores: validation when present, else training.
    let (score_rows, score_labels) = valid.unwrap_or((rows, labels));
    let scores: Vec<f64> = score_rows
        .iter()
        .map(|r| (dot(&weights, &r.values) + bias).as_f64())
        .collect();
    let (a, b) = platt_calibrate(&scores, score_labels);

    ModelParams::Svm {
        weights,
        bias,
        calibration_a: S::c(a),
        calibration_b: S::c(b),
    }
}

/// Fit `sigma(a·score + b)` to the labels by gradient descent on the log
/// loss, with the usual smoothed targets so separable scores stay finite.
fn platt_calibrate(scores: &[f64], labels: &[u8]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { t_pos } else { t_neg })
        .collect();

    let mut a = 1.0f64;
    let mut b = 0.0f64;
    let n = scores.len() as f64;
    for _ in 0..500 {
        let mut grad_a = 0.0;
        let mut grad_b = 0.0;
        for (&s, &t) in scores.iter().zip(&targets) {
            let z = a * s + b;
            let p = if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            };
            let err = p - t;
            grad_a += err * s;
            grad_b += err;
        }
        a -= 0.1 * grad_a / n;
        b -= 0.1 * grad_b / n;
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::separable_toy;
    use super::super::{train as train_model, Algorithm, TrainConfig};

    #[test]
    fn svm_separates_the_toy_and_calibrates_probabilities() {
        let m = separable_toy();
        let model = train_model(&TrainConfig::new(Algorithm::Svm, 4), &m, None).unwrap();
        assert_eq!(model.predict_label(&m, 0.5).unwrap(), m.labels());
        let proba = model.predict_proba(&m).unwrap();
        // calibrated outputs order the classes
        let max_benign = proba[..10].iter().cloned().fold(0.0f64, f64::max);
        let min_malicious = proba[10..].iter().cloned().fold(1.0f64, f64::min);
        assert!(max_benign < min_malicious);
    }
}
