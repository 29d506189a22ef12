//! Random forest: bootstrapped Gini trees with per-split feature sampling
//! of ⌈√F⌉ features and probability averaging across trees.
//!
//! Trees train in parallel; each derives its own RNG from the config seed
//! and its tree index, so the forest is identical for any thread count.

use rand::Rng;
use rayon::prelude::*;

use super::tree::{grow_gini, Tree};
use super::{DrfParams, ModelParams};
use crate::extract::FeatureVector;
use crate::scalar::Scalar;
use crate::seeding::rng_for;

pub(super) fn train<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    params: &DrfParams,
    seed: u64,
) -> ModelParams<S> {
    let (trees, _) = grow_forest(rows, labels, params, seed);
    ModelParams::Drf { trees }
}

/// Grow the forest, returning each tree's bootstrap sample for out-of-bag
/// analysis.
pub(crate) fn grow_forest<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    params: &DrfParams,
    seed: u64,
) -> (Vec<Tree<S>>, Vec<Vec<u32>>) {
    let n = rows.len();
    let n_features = rows[0].values.len();
    let per_split = (n_features as f64).sqrt().ceil() as usize;

    let grown: Vec<(Tree<S>, Vec<u32>)> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, "drf-tree", t as u64);
            let bootstrap: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
            let tree = grow_gini(
                rows,
                labels,
                bootstrap.clone(),
                params.max_depth,
                params.min_split,
                per_split,
                &mut rng,
            );
            (tree, bootstrap)
        })
        .collect();
    grown.into_iter().unzip()
}

/// Out-of-bag accuracy: every row is scored by the trees whose bootstrap
/// missed it.
#[cfg(test)]
pub(crate) fn oob_accuracy<S: Scalar>(
    rows: &[FeatureVector<S>],
    labels: &[u8],
    trees: &[Tree<S>],
    bootstraps: &[Vec<u32>],
) -> f64 {
    let n = rows.len();
    let mut correct = 0usize;
    let mut scored = 0usize;
    for i in 0..n {
        let mut sum = 0.0;
        let mut votes = 0usize;
        for (tree, bag) in trees.iter().zip(bootstraps) {
            if !bag.contains(&(i as u32)) {
                sum += tree.predict_row(&rows[i].values).as_f64();
                votes += 1;
            }
        }
        if votes > 0 {
            scored += 1;
            let label = u8::from(sum / votes as f64 >= 0.5);
            if label == labels[i] {
                correct += 1;
            }
        }
    }
    if scored == 0 {
        0.0
    } else {
        correct as f64 / scored as f64
    }
}

#[cfg(test)]
mod tests {
    use super::super::{train as train_model, Algorithm, DrfParams, TrainConfig};
    use super::*;
    use crate::catalog::catalog;
    use crate::dataset::{synthesize, SynthSpec};
    use crate::extract::extract_matrix;

    #[test]
    fn oob_accuracy_exceeds_080_on_the_default_synthetic_corpus() {
        let spec = SynthSpec::new(100, 100, 21);
        let corpus = synthesize(&spec).unwrap();
        let m = extract_matrix::<f64>(&corpus, &catalog(), spec.reference_time).unwrap();
        let params = DrfParams::default();
        let (trees, bags) = grow_forest(m.rows(), m.labels(), &params, 17);
        let oob = oob_accuracy(m.rows(), m.labels(), &trees, &bags);
        assert!(oob > 0.8, "out-of-bag accuracy {oob}");
    }

    #[test]
    fn forest_is_schedule_independent() {
        let spec = SynthSpec::new(30, 30, 2);
        let corpus = synthesize(&spec).unwrap();
        let m = extract_matrix::<f64>(&corpus, &catalog(), spec.reference_time).unwrap();
        let cfg = TrainConfig::new(Algorithm::Drf, 5).with_param("trees", serde_json::json!(16));

        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = pool1.install(|| train_model(&cfg, &m, None).unwrap().predict_proba(&m).unwrap());
        let b = pool8.install(|| train_model(&cfg, &m, None).unwrap().predict_proba(&m).unwrap());
        assert_eq!(a, b);
    }
}
