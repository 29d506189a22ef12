//! Feed-forward network: rectified-linear hidden layers, sigmoid output,
//! cross-entropy loss, adaptive-moment updates in mini-batches.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{log_loss, sigmoid, MlpParams, ModelParams};
use crate::extract::FeatureVector;
use crate::scalar::Scalar;
use crate::seeding::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<S> {
    /// Row-major weights: `w[out][in]`.
    pub w: Vec<Vec<S>>,
    pub b: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNet<S> {
    pub layers: Vec<Dense<S>>,
}

impl<S: Scalar> MlpNet<S> {
    /// He-uniform initialization, biases at zero.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut rng = rng_for(seed, "mlp-init", 0);
        let layers = sizes
            .windows(2)
            .map(|io| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let w = (0..fan_out)
                    .map(|_| {
                        (0..fan_in)
                            .map(|_| S::c(rng.random_range(-limit..limit)))
                            .collect()
                    })
                    .collect();
                Dense {
                    w,
                    b: vec![S::zero(); fan_out],
                }
            })
            .collect();
        MlpNet { layers }
    }

    /// Pre-activations per layer for one input.
    fn forward_zs(&self, input: &[S]) -> Vec<Vec<S>> {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut activation: Vec<S> = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z: Vec<S> = layer
                .w
                .iter()
                .zip(&layer.b)
                .map(|(row, b)| super::dot(row, &activation) + *b)
                .collect();
            if l + 1 < self.layers.len() {
                activation = z.iter().map(|&v| v.max(S::zero())).collect();
            }
            zs.push(z);
        }
        zs
    }

    pub fn forward_proba(&self, input: &[S]) -> S {
        let zs = self.forward_zs(input);
        sigmoid(zs.last().unwrap()[0])
    }

    fn zero_grads(&self) -> Vec<Dense<S>> {
        self.layers
            .iter()
            .map(|l| Dense {
                w: l.w.iter().map(|row| vec![S::zero(); row.len()]).collect(),
                b: vec![S::zero(); l.b.len()],
            })
            .collect()
    }

    /// Accumulate gradients of the cross-entropy loss for one sample.
    fn backward_into(&self, input: &[S], label: u8, grads: &mut [Dense<S>]) {
        let zs = self.forward_zs(input);
        let n_layers = self.layers.len();

        // activations per layer (input + hidden outputs)
        let mut activations: Vec<Vec<S>> = Vec::with_capacity(n_layers);
        activations.push(input.to_vec());
        for z in zs.iter().take(n_layers - 1) {
            activations.push(z.iter().map(|&v| v.max(S::zero())).collect());
        }

        let p = sigmoid(zs[n_layers - 1][0]);
        let mut delta: Vec<S> = vec![p - S::c(label as f64)];

        for l in (0..n_layers).rev() {
            for (out, d) in delta.iter().enumerate() {
                grads[l].b[out] += *d;
                for (inp, a) in activations[l].iter().enumerate() {
                    grads[l].w[out][inp] += *d * *a;
                }
            }
            if l == 0 {
                break;
            }
            let mut next = vec![S::zero(); self.layers[l].w[0].len()];
            for (out, d) in delta.iter().enumerate() {
                for (inp, w) in self.layers[l].w[out].iter().enumerate() {
                    next[inp] += *d * *w;
                }
            }
            // relu'
            for (v, z) in next.iter_mut().zip(&zs[l - 1]) {
                if *z <= S::zero() {
                    *v = S::zero();
                }
            }
            delta = next;
        }
    }

    /// Mean cross-entropy over a dataset.
    pub fn loss(&self, rows: &[FeatureVector<S>], labels: &[u8]) -> f64 {
        let proba: Vec<S> = rows.iter().map(|r| self.forward_proba(&r.values)).collect();
        log_loss(&proba, labels)
    }
}

struct Adam<S> {
    m: Vec<Dense<S>>,
    v: Vec<Dense<S>>,
    t: i32,
}

impl<S: Scalar> Adam<S> {
    fn new(net: &MlpNet<S>) -> Self {
        Adam {
            m: net.zero_grads(),
            v: net.zero_grads(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut MlpNet<S>, grads: &[Dense<S>], lr: f64, batch: usize) {
        self.t += 1;
        let (b1, b2, eps) = (S::c(0.9), S::c(0.999), S::c(1e-8));
        let scale = S::c(1.0 / batch as f64);
        let correction1 = S::c(1.0 - 0.9f64.powi(self.t));
        let correction2 = S::c(1.0 - 0.999f64.powi(self.t));
        let lr = S::c(lr);

        for (l, layer) in net.layers.iter_mut().enumerate() {
            for out in 0..layer.b.len() {
                for inp in 0..layer.w[out].len() {
                    let g = grads[l].w[out][inp] * scale;
                    let m = &mut self.m[l].w[out][inp];
                    let v = &mut self.v[l].w[out][inp];
                    *m = b1 * *m + (S::one() - b1) * g;
                    *v = b2 * *v + (S::one() - b2) * g * g;
                    let mhat = *m / correction1;
                    let vhat = *v / correction2;
                    layer.w[out][inp] -= lr * mhat / (vhat.sqrt() + eps);
                }
                let g = grads[l].b[out] * scale;
                let m = &mut self.m[l].b[out];
                let v = &mut self.v[l].b[out];
                *m = b1 * *m + (S::one() - b1) * g;
                *v = b2 * *v + (S::one() - b2) * g * g;
                let mhat = *m / correction1;
                let vhat = *v / correction2;
                layer.b[out] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

pub(super) fn train<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    valid: Option<(&[FeatureVector<S>], &[u8])>,
    params: &MlpParams,
    seed: u64,
) -> ModelParams<S> {
    let n_features = rows[0].values.len();
    let mut sizes = vec![n_features];
    sizes.extend(&params.hidden);
    sizes.push(1);

    let mut net = MlpNet::init(&sizes, seed);
    let mut adam = Adam::new(&net);
    let mut best: Option<(f64, MlpNet<S>)> = None;
    let mut stale = 0usize;

    for epoch in 0..params.epochs {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut rng_for(seed, "mlp-epoch", epoch as u64));
        for chunk in order.chunks(params.batch) {
            let mut grads = net.zero_grads();
            for &i in chunk {
                net.backward_into(&rows[i].values, labels[i], &mut grads);
            }
            adam.step(&mut net, &grads, params.learning_rate, chunk.len());
        }

        if let Some((vrows, vlabels)) = valid {
            let loss = net.loss(vrows, vlabels);
            if best.as_ref().is_none_or(|(b, _)| loss < b - 1e-9) {
                best = Some((loss, net.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
    }

    if let Some((_, snapshot)) = best {
        net = snapshot;
    }
    ModelParams::Mlp { net }
}

/// Compare analytic gradients against central finite differences on the
/// mean loss; returns the maximum relative error over every parameter.
pub fn gradient_check(rows: &[FeatureVector<f64>], labels: &[u8], seed: u64) -> f64 {
    let n_features = rows[0].values.len();
    let sizes = [n_features, 6, 4, 1];
    let net = MlpNet::<f64>::init(&sizes, seed);

    // analytic: mean over rows
    let mut grads = net.zero_grads();
    for (row, &label) in rows.iter().zip(labels) {
        net.backward_into(&row.values, label, &mut grads);
    }
    let scale = 1.0 / rows.len() as f64;

    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut probe = net.clone();
    for l in 0..net.layers.len() {
        for out in 0..net.layers[l].b.len() {
            for inp in 0..net.layers[l].w[out].len() {
                let analytic = grads[l].w[out][inp] * scale;
                let original = probe.layers[l].w[out][inp];
                probe.layers[l].w[out][inp] = original + h;
                let plus = probe.loss(rows, labels);
                probe.layers[l].w[out][inp] = original - h;
                let minus = probe.loss(rows, labels);
                probe.layers[l].w[out][inp] = original;
                let numeric = (plus - minus) / (2.0 * h);
                max_rel = max_rel.max(relative_error(analytic, numeric));
            }
            let analytic = grads[l].b[out] * scale;
            let original = probe.layers[l].b[out];
            probe.layers[l].b[out] = original + h;
            let plus = probe.loss(rows, labels);
            probe.layers[l].b[out] = original - h;
            let minus = probe.loss(rows, labels);
            probe.layers[l].b[out] = original;
            let numeric = (plus - minus) / (2.0 * h);
            max_rel = max_rel.max(relative_error(analytic, numeric));
        }
    }
    max_rel
}

fn relative_error(a: f64, b: f64) -> f64 {
    let denom = (a.abs() + b.abs()).max(1e-8);
    (a - b).abs() / denom
}
