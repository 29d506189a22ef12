//! The five classifier back-ends behind one train/predict contract.
//!
//! Every algorithm is deterministic given `(config.seed, data)`: internal
//! randomness (shuffles, bootstraps, feature sampling, weight init) derives
//! from the config seed via stable tags, never from thread scheduling.

mod drf;
mod gbm;
mod glm;
pub mod mlp;
mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::extract::{FeatureMatrix, FeatureVector};
use crate::scalar::Scalar;
pub use mlp::MlpNet;
pub use tree::Tree;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("bad hyperparameter: {0}")]
    BadHyperparam(String),
    #[error("catalog fingerprint mismatch: model {expected}, input {got}")]
    CatalogMismatch { expected: String, got: String },
    #[error("training data is empty")]
    EmptyTraining,
    #[error("model serialization: {0}")]
    Serialization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Glm,
    Svm,
    Gbm,
    Drf,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Glm,
        Algorithm::Svm,
        Algorithm::Gbm,
        Algorithm::Drf,
        Algorithm::Mlp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Glm => "glm",
            Algorithm::Svm => "svm",
            Algorithm::Gbm => "gbm",
            Algorithm::Drf => "drf",
            Algorithm::Mlp => "mlp",
        }
    }

    pub fn parse(text: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.as_str() == text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeMode {
    /// On for glm/svm/mlp, off for the tree ensembles.
    Auto,
    On,
    Off,
}

/// Training request: algorithm, hyperparameter overrides, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Key/value overrides applied on top of the algorithm defaults.
    #[serde(default)]
    pub hyperparams: serde_json::Map<String, Value>,
    pub seed: u64,
    #[serde(default = "default_standardize")]
    pub standardize: StandardizeMode,
}

fn default_standardize() -> StandardizeMode {
    StandardizeMode::Auto
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        TrainConfig {
            algorithm,
            hyperparams: serde_json::Map::new(),
            seed,
            standardize: StandardizeMode::Auto,
        }
    }

    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        self.hyperparams.insert(key.to_string(), value);
        self
    }
}

// ─── Hyperparameters ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlmParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
}

impl Default for GlmParams {
    fn default() -> Self {
        GlmParams {
            l2: 1e-3,
            learning_rate: 0.1,
            epochs: 500,
            patience: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbmParams {
    pub trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            trees: 100,
            depth: 3,
            learning_rate: 0.1,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrfParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_split: usize,
}

impl Default for DrfParams {
    fn default() -> Self {
        DrfParams {
            trees: 100,
            max_depth: 12,
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![64, 32],
            learning_rate: 1e-3,
            epochs: 200,
            batch: 32,
            patience: 20,
        }
    }
}

/// Typed hyperparameters after applying overrides to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedParams {
    Glm(GlmParams),
    Svm(SvmParams),
    Gbm(GbmParams),
    Drf(DrfParams),
    Mlp(MlpParams),
}

fn resolve_params(cfg: &TrainConfig) -> Result<ResolvedParams, ModelError> {
    fn merge<T: Serialize + serde::de::DeserializeOwned + Default>(
        overrides: &serde_json::Map<String, Value>,
    ) -> Result<T, ModelError> {
        let mut base = serde_json::to_value(T::default())
            .map_err(|e| ModelError::Serialization(e.to_string()))?;
        if let Value::Object(map) = &mut base {
            for (k, v) in overrides {
                map.insert(k.clone(), v.clone());
            }
        }
        serde_json::from_value(base).map_err(|e| ModelError::BadHyperparam(e.to_string()))
    }

    let resolved = match cfg.algorithm {
        Algorithm::Glm => ResolvedParams::Glm(merge::<GlmParams>(&cfg.hyperparams)?),
        Algorithm::Svm => ResolvedParams::Svm(merge::<SvmParams>(&cfg.hyperparams)?),
        Algorithm::Gbm => ResolvedParams::Gbm(merge::<GbmParams>(&cfg.hyperparams)?),
        Algorithm::Drf => ResolvedParams::Drf(merge::<DrfParams>(&cfg.hyperparams)?),
        Algorithm::Mlp => ResolvedParams::Mlp(merge::<MlpParams>(&cfg.hyperparams)?),
    };
    validate_params(&resolved)?;
    Ok(resolved)
}

fn validate_params(params: &ResolvedParams) -> Result<(), ModelError> {
    let bad = |msg: &str| Err(ModelError::BadHyperparam(msg.to_string()));
    match params {
        ResolvedParams::Glm(p) => {
            if p.learning_rate <= 0.0 || p.l2 < 0.0 || p.epochs == 0 {
                return bad("glm: learning_rate > 0, l2 >= 0, epochs > 0 required");
            }
        }
        ResolvedParams::Svm(p) => {
            if p.c <= 0.0 || p.epochs == 0 {
                return bad("svm: c > 0 and epochs > 0 required");
            }
        }
        ResolvedParams::Gbm(p) => {
            if p.trees == 0 || p.depth == 0 || p.learning_rate <= 0.0 || p.min_leaf == 0 {
                return bad("gbm: trees, depth, min_leaf > 0 and learning_rate > 0 required");
            }
        }
        ResolvedParams::Drf(p) => {
            if p.trees == 0 || p.max_depth == 0 || p.min_split < 2 {
                return bad("drf: trees, max_depth > 0 and min_split >= 2 required");
            }
        }
        ResolvedParams::Mlp(p) => {
            if p.hidden.is_empty()
                || p.hidden.contains(&0)
                || p.learning_rate <= 0.0
                || p.epochs == 0
                || p.batch == 0
            {
                return bad("mlp: non-empty hidden layers, learning_rate > 0, epochs/batch > 0");
            }
        }
    }
    Ok(())
}

// ─── Standardization ─────────────────────────────────────────────────────────

/// Per-feature mean and standard deviation from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization<S> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

fn standardize_fit<S: Scalar>(rows: &[FeatureVector<S>]) -> Standardization<S> {
    let n_features = rows[0].values.len();
    let n = S::c(rows.len() as f64);
    let mut mean = vec![S::zero(); n_features];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(&row.values) {
            *m += *v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![S::zero(); n_features];
    for row in rows {
        for ((s, v), m) in std.iter_mut().zip(&row.values).zip(&mean) {
            let d = *v - *m;
            *s += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s < S::c(1e-12) {
            *s = S::one();
        }
    }
    Standardization { mean, std }
}

fn standardize_apply<S: Scalar>(
    stats: &Standardization<S>,
    rows: &[FeatureVector<S>],
) -> Vec<FeatureVector<S>> {
    rows.iter()
        .map(|row| FeatureVector {
            package_name: row.package_name.clone(),
            values: row
                .values
                .iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((v, m), s)| (*v - *m) / *s)
                .collect(),
        })
        .collect()
}

/// Numerically stable logistic.
pub(crate) fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

// ─── The trained model ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams<S> {
    Glm {
        weights: Vec<S>,
        bias: S,
    },
    Svm {
        weights: Vec<S>,
        bias: S,
        calibration_a: S,
        calibration_b: S,
    },
    Gbm {
        base_score: S,
        learning_rate: S,
        trees: Vec<Tree<S>>,
    },
    Drf {
        trees: Vec<Tree<S>>,
    },
    Mlp {
        net: MlpNet<S>,
    },
}

/// An opaque trained predictor: versioned, serializable, and bound to the
/// catalog it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<S: Scalar> {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub hyperparams: ResolvedParams,
    pub catalog_fingerprint: String,
    pub standardization: Option<Standardization<S>>,
    pub params: ModelParams<S>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn check_finite<S: Scalar>(m: &FeatureMatrix<S>) -> Result<(), ModelError> {
    for (r, row) in m.rows().iter().enumerate() {
        for (c, v) in row.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteFeature { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Train a model. Validation data (when non-empty) drives early stopping
/// and score calibration only; it never feeds parameter fitting.
pub fn train<S: Scalar>(
    cfg: &TrainConfig,
    train: &FeatureMatrix<S>,
    valid: Option<&FeatureMatrix<S>>,
) -> Result<TrainedModel<S>, ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::EmptyTraining);
    }
    let has_both = train.labels().contains(&1)
        && train.labels().contains(&0);
    if !has_both {
        return Err(ModelError::SingleClassTraining);
    }
    check_finite(train)?;
    if let Some(v) = valid {
        check_finite(v)?;
    }
    let resolved = resolve_params(cfg)?;
    let valid = valid.filter(|v| v.n_rows() > 0);

    let standardize = match cfg.standardize {
        StandardizeMode::On => true,
        StandardizeMode::Off => false,
        StandardizeMode::Auto => matches!(
            cfg.algorithm,
            Algorithm::Glm | Algorithm::Svm | Algorithm::Mlp
        ),
    };
    let standardization = standardize.then(|| standardize_fit(train.rows()));
    let train_rows: Vec<FeatureVector<S>> = match &standardization {
        Some(stats) => standardize_apply(stats, train.rows()),
        None => train.rows().to_vec(),
    };
    let valid_rows: Option<(Vec<FeatureVector<S>>, &[u8])> = valid.map(|v| {
        let rows = match &standardization {
            Some(stats) => standardize_apply(stats, v.rows()),
            None => v.rows().to_vec(),
        };
        (rows, v.labels())
    });
    let valid_view = valid_rows
        .as_ref()
        .map(|(rows, labels)| (rows.as_slice(), *labels));

    let params = match &resolved {
        ResolvedParams::Glm(p) => glm::train(&train_rows, train.labels(), valid_view, p),
        ResolvedParams::Svm(p) => svm::train(&train_rows, train.labels(), valid_view, p, cfg.seed),
        ResolvedParams::Gbm(p) => gbm::train(&train_rows, train.labels(), p),
        ResolvedParams::Drf(p) => drf::train(&train_rows, train.labels(), p, cfg.seed),
        ResolvedParams::Mlp(p) => mlp::train(&train_rows, train.labels(), valid_view, p, cfg.seed),
    };

    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        algorithm: cfg.algorithm,
        hyperparams: resolved,
        catalog_fingerprint: train.catalog().fingerprint(),
        standardization,
        params,
    })
}

impl<S: Scalar> TrainedModel<S> {
    fn check_catalog(&self, x: &FeatureMatrix<S>) -> Result<(), ModelError> {
        let got = x.catalog().fingerprint();
        if got != self.catalog_fingerprint {
            return Err(ModelError::CatalogMismatch {
                expected: self.catalog_fingerprint.clone(),
                got,
            });
        }
        Ok(())
    }

    fn prepared_rows(&self, x: &FeatureMatrix<S>) -> Vec<FeatureVector<S>> {
        match &self.standardization {
            Some(stats) => standardize_apply(stats, x.rows()),
            None => x.rows().to_vec(),
        }
    }

    /// Malicious-class probability per row, in `[0, 1]`.
    pub fn predict_proba(&self, x: &FeatureMatrix<S>) -> Result<Vec<S>, ModelError> {
        self.check_catalog(x)?;
        let rows = self.prepared_rows(x);
        let proba = match &self.params {
            ModelParams::Glm { weights, bias } => rows
                .iter()
                .map(|r| sigmoid(dot(weights, &r.values) + *bias))
                .collect(),
            ModelParams::Svm {
                weights,
                bias,
                calibration_a,
                calibration_b,
            } => rows
                .iter()
                .map(|r| {
                    let score = dot(weights, &r.values) + *bias;
                    sigmoid(*calibration_a * score + *calibration_b)
                })
                .collect(),
            ModelParams::Gbm {
                base_score,
                learning_rate,
                trees,
            } => rows
                .iter()
                .map(|r| {
                    let mut score = *base_score;
                    for tree in trees {
                        score += *learning_rate * tree.predict_row(&r.values);
                    }
                    sigmoid(score)
                })
                .collect(),
            ModelParams::Drf { trees } => rows
                .iter()
                .map(|r| {
                    let sum: S = trees.iter().map(|t| t.predict_row(&r.values)).sum();
                    sum / S::c(trees.len() as f64)
                })
                .collect(),
            ModelParams::Mlp { net } => rows.iter().map(|r| net.forward_proba(&r.values)).collect(),
        };
        Ok(proba)
    }

    /// Per-tree probabilities for ensemble models (after shrinkage for the
    /// boosted model this is the raw leaf value, not a probability).
    pub fn per_tree_outputs(&self, x: &FeatureMatrix<S>) -> Option<Vec<Vec<S>>> {
        let trees = match &self.params {
            ModelParams::Gbm { trees, .. } | ModelParams::Drf { trees } => trees,
            _ => return None,
        };
        let rows = self.prepared_rows(x);
        Some(
            trees
                .iter()
                .map(|t| rows.iter().map(|r| t.predict_row(&r.values)).collect())
                .collect(),
        )
    }

    /// Hard labels: 1 when probability ≥ threshold (inclusive).
    pub fn predict_label(&self, x: &FeatureMatrix<S>, threshold: f64) -> Result<Vec<u8>, ModelError> {
        if !(0.0..1.0).contains(&threshold) || threshold == 0.0 {
            return Err(ModelError::BadHyperparam(format!(
                "threshold must lie in (0, 1), got {threshold}"
            )));
        }
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p.as_f64() >= threshold))
            .collect())
    }

    pub fn to_json(&self) -> Result<String, ModelError>
    where
        S: serde::Serialize,
    {
        serde_json::to_string(self).map_err(|e| ModelError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError>
    where
        S: serde::de::DeserializeOwned,
    {
        serde_json::from_str(text).map_err(|e| ModelError::Serialization(e.to_string()))
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub(crate) fn log_loss<S: Scalar>(proba: &[S], labels: &[u8]) -> f64 {
    let eps = 1e-12;
    let mut total = 0.0;
    for (p, &y) in proba.iter().zip(labels) {
        let p = p.as_f64().clamp(eps, 1.0 - eps);
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total / labels.len() as f64
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::catalog::catalog;
    use crate::dataset::{split, synthesize, SplitSpec, SynthSpec};
    use crate::extract::extract_matrix;

    #[test]
    fn glm_fits_separable_toy_perfectly() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Glm, 1);
        let model = train(&cfg, &m, None).unwrap();
        let labels = model.predict_label(&m, 0.5).unwrap();
        assert_eq!(labels, m.labels());
    }

    #[test]
    fn single_class_training_is_rejected() {
        let m = matrix(&[&[1.0], &[2.0], &[3.0]], &[1, 1, 1]);
        let cfg = TrainConfig::new(Algorithm::Glm, 1);
        assert!(matches!(
            train(&cfg, &m, None),
            Err(ModelError::SingleClassTraining)
        ));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let m = matrix(&[&[1.0], &[f64::NAN]], &[0, 1]);
        let cfg = TrainConfig::new(Algorithm::Gbm, 1);
        assert!(matches!(
            train(&cfg, &m, None),
            Err(ModelError::NonFiniteFeature { row: 1, col: 0 })
        ));
    }

    #[test]
    fn unknown_hyperparam_is_rejected() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Glm, 1)
            .with_param("not_a_knob", serde_json::json!(3));
        assert!(matches!(
            train(&cfg, &m, None),
            Err(ModelError::BadHyperparam(_))
        ));
    }

    #[test]
    fn invalid_hyperparam_value_is_rejected() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Gbm, 1).with_param("trees", serde_json::json!(0));
        assert!(matches!(
            train(&cfg, &m, None),
            Err(ModelError::BadHyperparam(_))
        ));
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let m = separable_toy();
        for algorithm in Algorithm::ALL {
            let cfg = TrainConfig::new(algorithm, 3);
            let model = train(&cfg, &m, None).unwrap();
            for p in model.predict_proba(&m).unwrap() {
                assert!((0.0..=1.0).contains(&p), "{algorithm:?} produced {p}");
            }
        }
    }

    #[test]
    fn zero_weight_glm_outputs_half() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Glm, 1);
        let mut model = train(&cfg, &m, None).unwrap();
        model.params = ModelParams::Glm {
            weights: vec![0.0; 2],
            bias: 0.0,
        };
        for p in model.predict_proba(&m).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn label_threshold_is_inclusive() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Glm, 1);
        let mut model = train(&cfg, &m, None).unwrap();
        model.params = ModelParams::Glm {
            weights: vec![0.0; 2],
            bias: 0.0,
        };
        // probability exactly 0.5 at threshold 0.5 → label 1
        let labels = model.predict_label(&m, 0.5).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
        // 0.5 below threshold 0.9 → label 0
        let labels = model.predict_label(&m, 0.9).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        assert!(model.predict_label(&m, 0.0).is_err());
        assert!(model.predict_label(&m, 1.0).is_err());
    }

    #[test]
    fn duplicated_rows_get_identical_probabilities() {
        let m = matrix(
            &[&[1.0, 2.0], &[5.0, 6.0], &[1.0, 2.0], &[5.0, 6.0]],
            &[0, 1, 0, 1],
        );
        for algorithm in Algorithm::ALL {
            let model = train(&TrainConfig::new(algorithm, 9), &m, None).unwrap();
            let p = model.predict_proba(&m).unwrap();
            assert_eq!(p[0], p[2], "{algorithm:?}");
            assert_eq!(p[1], p[3], "{algorithm:?}");
        }
    }

    #[test]
    fn catalog_mismatch_is_rejected() {
        let m2 = separable_toy();
        let m3 = matrix(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]], &[0, 1]);
        let model = train(&TrainConfig::new(Algorithm::Glm, 1), &m2, None).unwrap();
        assert!(matches!(
            model.predict_proba(&m3),
            Err(ModelError::CatalogMismatch { .. })
        ));
    }

    #[test]
    fn seed_determinism_across_runs() {
        let spec = SynthSpec::new(60, 60, 5);
        let corpus = synthesize(&spec).unwrap();
        let cat = catalog();
        let m = extract_matrix::<f64>(&corpus, &cat, spec.reference_time).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = TrainConfig::new(algorithm, 42);
            let a = train(&cfg, &m, None).unwrap().predict_proba(&m).unwrap();
            let b = train(&cfg, &m, None).unwrap().predict_proba(&m).unwrap();
            assert_eq!(a, b, "{algorithm:?} not deterministic");
        }
    }

    #[test]
    fn standardization_uses_training_rows_only() {
        let spec = SynthSpec::new(40, 40, 8);
        let corpus = synthesize(&spec).unwrap();
        let cat = catalog();
        let m = extract_matrix::<f64>(&corpus, &cat, spec.reference_time).unwrap();
        let s = split(m.labels(), &SplitSpec::new(3)).unwrap();
        let train_m = m.select_rows(&s.train_idx);
        let valid_m = m.select_rows(&s.valid_idx);

        let model = train(&TrainConfig::new(Algorithm::Glm, 7), &train_m, Some(&valid_m)).unwrap();
        let stats = model.standardization.as_ref().unwrap();

        // recompute means over the training rows only
        let col = 5;
        let expected: f64 = train_m.rows().iter().map(|r| r.values[col]).sum::<f64>()
            / train_m.n_rows() as f64;
        assert!((stats.mean[col] - expected).abs() < 1e-12);

        // pooled train+valid mean differs, so leakage would be visible
        let pooled: f64 = (train_m.rows().iter().chain(valid_m.rows().iter()))
            .map(|r| r.values[col])
            .sum::<f64>()
            / (train_m.n_rows() + valid_m.n_rows()) as f64;
        assert!((pooled - expected).abs() > 1e-9);
    }

    #[test]
    fn drf_probability_is_the_tree_average() {
        let m = separable_toy();
        let cfg = TrainConfig::new(Algorithm::Drf, 2).with_param("trees", serde_json::json!(5));
        let model = train(&cfg, &m, None).unwrap();
        let proba = model.predict_proba(&m).unwrap();
        let per_tree = model.per_tree_outputs(&m).unwrap();
        assert_eq!(per_tree.len(), 5);
        for (r, p) in proba.iter().enumerate() {
            let mean: f64 = per_tree.iter().map(|t| t[r]).sum::<f64>() / 5.0;
            assert!((p - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn model_json_roundtrip_preserves_predictions() {
        let m = separable_toy();
        for algorithm in Algorithm::ALL {
            let model = train(&TrainConfig::new(algorithm, 11), &m, None).unwrap();
            let json = model.to_json().unwrap();
            let loaded = TrainedModel::<f64>::from_json(&json).unwrap();
            assert_eq!(
                model.predict_proba(&m).unwrap(),
                loaded.predict_proba(&m).unwrap(),
                "{algorithm:?}"
            );
            assert_eq!(loaded.format_version, MODEL_FORMAT_VERSION);
        }
    }

    #[test]
    fn f32_training_works() {
        let rows: Vec<FeatureVector<f32>> = (0..20)
            .map(|i| FeatureVector {
                package_name: format!("r{i}"),
                values: vec![i as f32, (20 - i) as f32],
            })
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let m = FeatureMatrix::new(rows, labels.clone(), test_support::toy_catalog(2));
        let model = train(&TrainConfig::new(Algorithm::Gbm, 1), &m, None).unwrap();
        assert_eq!(model.predict_label(&m, 0.5).unwrap(), labels);
    }
}
