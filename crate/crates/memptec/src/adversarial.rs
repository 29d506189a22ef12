//! Adversarial evaluation: rank features by importance, rewrite malicious
//! rows' feature values with draws from the benign distribution
//! (percentage-wise, TOP-N, or whole metadata keys at a time), and drift
//! the monotone temporal/interaction features forward.
//!
//! Attacks only ever touch rows labeled malicious; metrics are always
//! computed against the original labels.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{FeatureCatalog, ValueKind};
use crate::evaluation::{metrics, EvalError, MetricSet};
use crate::extract::{ccs, FeatureMatrix, CCS_DEFAULT_BASE};
use crate::models::{ModelError, TrainedModel};
use crate::scalar::Scalar;
use crate::seeding::rng_for;

#[derive(Debug, Error)]
pub enum AdvError {
    #[error("exact Shapley enumeration supports at most 12 features, got {0}")]
    TooManyFeaturesForExact(usize),
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    #[error("benign pool has no benign rows")]
    EmptyPool,
    #[error("grouping does not partition the catalog: {0}")]
    IncompleteGrouping(String),
    #[error("bad attack steps: {0}")]
    BadSteps(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Permutation,
    ExactShapley,
}

/// Features ordered by importance score (descending, ties by catalog
/// order); scores are clamped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub method: RankMethod,
    pub seed: u64,
    pub entries: Vec<(String, f64)>,
}

impl ImportanceRanking {
    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStep {
    pub step_id: String,
    pub manipulated: Vec<String>,
    pub metrics: MetricSet,
}

/// Model degradation trace: the baseline plus one entry per attack step.
/// The first step repeats the baseline with nothing manipulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackCurve {
    pub baseline: MetricSet,
    pub steps: Vec<AttackStep>,
}

fn model_accuracy<S: Scalar>(
    model: &TrainedModel<S>,
    x: &FeatureMatrix<S>,
) -> Result<f64, AdvError> {
    let proba = model.predict_proba(x)?;
    Ok(metrics(&proba, x.labels(), DECISION_THRESHOLD)?.accuracy)
}

fn model_metrics<S: Scalar>(
    model: &TrainedModel<S>,
    x: &FeatureMatrix<S>,
) -> Result<MetricSet, AdvError> {
    let proba = model.predict_proba(x)?;
    Ok(metrics(&proba, x.labels(), DECISION_THRESHOLD)?)
}

// ─── Importance ranking ──────────────────────────────────────────────────────

/// Rank every feature of the evaluated catalog by importance.
///
/// Permutation importance is the mean accuracy drop over `repeats` seeded
/// within-column shuffles. The exact-Shapley method enumerates all feature
/// coalitions (≤ 12 features) and serves as the small-scale oracle.
pub fn rank_features<S: Scalar>(
    model: &TrainedModel<S>,
    x: &FeatureMatrix<S>,
    method: RankMethod,
    seed: u64,
    repeats: usize,
) -> Result<ImportanceRanking, AdvError> {
    let scores = match method {
        RankMethod::Permutation => permutation_scores(model, x, seed, repeats)?,
        RankMethod::ExactShapley => exact_shapley_values(model, x)?,
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let names: Vec<&str> = x.catalog().names().collect();
    let entries = order
        .into_iter()
        .map(|i| (names[i].to_string(), scores[i].max(0.0)))
        .collect();
    Ok(ImportanceRanking {
        method,
        seed,
        entries,
    })
}

fn permutation_scores<S: Scalar>(
    model: &TrainedModel<S>,
    x: &FeatureMatrix<S>,
    seed: u64,
    repeats: usize,
) -> Result<Vec<f64>, AdvError> {
    let baseline = model_accuracy(model, x)?;
    let n = x.n_rows();
    let mut scores = Vec::with_capacity(x.n_features());
    for col in 0..x.n_features() {
        let mut drop_sum = 0.0;
        for r in 0..repeats {
            let mut rng = rng_for(seed, "perm-shuffle", (col * repeats + r) as u64);
            // Fisher-Yates over the column
            let mut shuffled = x.clone();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                let vi = shuffled.value(i, col);
                let vj = shuffled.value(j, col);
                shuffled.set_value(i, col, vj);
                shuffled.set_value(j, col, vi);
            }
            drop_sum += baseline - model_accuracy(model, &shuffled)?;
        }
        scores.push(drop_sum / repeats as f64);
    }
    Ok(scores)
}

/// Exact Shapley value of model accuracy per feature, by full coalition
/// enumeration. Features outside a coalition are frozen at their column
/// means. Satisfies the efficiency axiom:
/// `Σ φ_f = v(all features) − v(no features)`.
pub fn exact_shapley_values<S: Scalar>(
    model: &TrainedModel<S>,
    x: &FeatureMatrix<S>,
) -> Result<Vec<f64>, AdvError> {
    let f = x.n_features();
    if f > 12 {
        return Err(AdvError::TooManyFeaturesForExact(f));
    }
    let n = x.n_rows() as f64;
    let means: Vec<S> = (0..f)
        .map(|c| x.column(c).into_iter().sum::<S>() / S::c(n))
        .collect();

    // v(S) for every coalition mask
    let mut value = vec![0.0f64; 1 << f];
    for (mask, slot) in value.iter_mut().enumerate() {
        let mut frozen = x.clone();
        for col in 0..f {
            if mask & (1 << col) == 0 {
                for row in 0..x.n_rows() {
                    frozen.set_value(row, col, means[col]);
                }
            }
        }
        *slot = model_accuracy(model, &frozen)?;
    }

    let fact: Vec<f64> = {
        let mut v = vec![1.0f64];
        for i in 1..=f {
            v.push(v[i - 1] * i as f64);
        }
        v
    };
    let mut phi = vec![0.0f64; f];
    for (col, phi_col) in phi.iter_mut().enumerate() {
        let bit = 1usize << col;
        for mask in 0..(1usize << f) {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight = fact[s] * fact[f - s - 1] / fact[f];
            *phi_col += weight * (value[mask | bit] - value[mask]);
        }
    }
    Ok(phi)
}

// ─── Benign-distribution manipulation ────────────────────────────────────────

/// Replace `feature` in every malicious row of `x` with the value of that
/// feature from a seeded-random benign row of the pool. Benign rows of `x`
/// are returned bit-identical.
pub fn manipulate_feature<S: Scalar>(
    x: &FeatureMatrix<S>,
    feature: &str,
    benign_pool: &FeatureMatrix<S>,
    seed: u64,
) -> Result<FeatureMatrix<S>, AdvError> {
    let col = x
        .catalog()
        .index_of(feature)
        .ok_or_else(|| AdvError::UnknownFeature(feature.to_string()))?;
    let pool_col = benign_pool
        .catalog()
        .index_of(feature)
        .ok_or_else(|| AdvError::UnknownFeature(feature.to_string()))?;
    let pool_rows = benign_pool.benign_indices();
    if pool_rows.is_empty() {
        return Err(AdvError::EmptyPool);
    }

    let mut out = x.clone();
    // The RNG stream is keyed by the column, not the call sequence, so any
    // cumulative schedule over the same features lands in the same state.
    let mut rng = rng_for(seed, "manipulate-col", col as u64);
    for i in x.malicious_indices() {
        let j = pool_rows[rng.random_range(0..pool_rows.len())];
        out.set_value(i, col, benign_pool.value(j, pool_col));
    }
    Ok(out)
}

/// Cumulative manipulation with metric checkpoints. `ordered` is the
/// manipulation order; `checkpoints` are `(step_id, how many features of
/// the order are active)` pairs, ascending. The inspector sees the matrix
/// after every checkpoint.
pub fn run_manipulation_attack<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    benign_pool: &FeatureMatrix<S>,
    ordered: &[String],
    checkpoints: &[(String, usize)],
    seed: u64,
    mut inspector: impl FnMut(&FeatureMatrix<S>, &AttackStep),
) -> Result<AttackCurve, AdvError> {
    let baseline = model_metrics(model, test)?;
    let mut steps = vec![AttackStep {
        step_id: "baseline".to_string(),
        manipulated: Vec::new(),
        metrics: baseline,
    }];
    inspector(test, &steps[0]);

    let mut current = test.clone();
    let mut applied: Vec<String> = Vec::new();
    for (step_id, count) in checkpoints {
        if *count > ordered.len() {
            return Err(AdvError::BadSteps(format!(
                "checkpoint {step_id} wants {count} features, order has {}",
                ordered.len()
            )));
        }
        while applied.len() < *count {
            let feature = &ordered[applied.len()];
            current = manipulate_feature(&current, feature, benign_pool, seed)?;
            applied.push(feature.clone());
        }
        let step = AttackStep {
            step_id: step_id.clone(),
            manipulated: applied.clone(),
            metrics: model_metrics(model, &current)?,
        };
        inspector(&current, &step);
        steps.push(step);
    }
    Ok(AttackCurve { baseline, steps })
}

/// Manipulate the top ⌈f·F⌉ ranked features cumulatively at each fraction.
pub fn attack_percentage<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    benign_pool: &FeatureMatrix<S>,
    ranking: &ImportanceRanking,
    fractions: &[f64],
    seed: u64,
) -> Result<AttackCurve, AdvError> {
    let mut prev = 0.0;
    for &f in fractions {
        if f <= prev || f > 1.0 {
            return Err(AdvError::BadSteps(format!(
                "fractions must ascend within (0, 1], got {fractions:?}"
            )));
        }
        prev = f;
    }
    let total = ranking.entries.len();
    let ordered = ranking.names();
    let checkpoints: Vec<(String, usize)> = fractions
        .iter()
        .map(|&f| {
            (
                format!("pct_{}", f * 100.0),
                ((f * total as f64).ceil() as usize).min(total),
            )
        })
        .collect();
    run_manipulation_attack(model, test, benign_pool, &ordered, &checkpoints, seed, |_, _| {})
}

/// Manipulate the top-N ranked features cumulatively for N = 1..n_max.
pub fn attack_topn<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    benign_pool: &FeatureMatrix<S>,
    ranking: &ImportanceRanking,
    n_max: usize,
    seed: u64,
) -> Result<AttackCurve, AdvError> {
    if n_max == 0 || n_max > ranking.entries.len() {
        return Err(AdvError::BadSteps(format!(
            "n_max must lie in 1..={}, got {n_max}",
            ranking.entries.len()
        )));
    }
    let ordered = ranking.names();
    let checkpoints: Vec<(String, usize)> =
        (1..=n_max).map(|n| (format!("top_{n}"), n)).collect();
    run_manipulation_attack(model, test, benign_pool, &ordered, &checkpoints, seed, |_, _| {})
}

/// Default information grouping: features bundled by the metadata key they
/// derive from.
pub fn information_grouping(cat: &FeatureCatalog) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for desc in cat.features() {
        groups
            .entry(desc.source_information.clone())
            .or_default()
            .push(desc.name.clone());
    }
    groups
}

/// Manipulate whole metadata keys: groups are ranked by the sum of their
/// member importances and rewritten one group at a time.
pub fn attack_information<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    benign_pool: &FeatureMatrix<S>,
    grouping: &BTreeMap<String, Vec<String>>,
    ranking: &ImportanceRanking,
    seed: u64,
) -> Result<AttackCurve, AdvError> {
    // The grouping must partition the catalog.
    let cat = test.catalog();
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for (group, members) in grouping {
        for m in members {
            if cat.index_of(m).is_none() {
                return Err(AdvError::IncompleteGrouping(format!(
                    "group {group} references unknown feature {m}"
                )));
            }
            if let Some(previous) = seen.insert(m.as_str(), group.as_str()) {
                return Err(AdvError::IncompleteGrouping(format!(
                    "feature {m} appears in groups {previous} and {group}"
                )));
            }
        }
    }
    for name in cat.names() {
        if !seen.contains_key(name) {
            return Err(AdvError::IncompleteGrouping(format!(
                "feature {name} missing from every group"
            )));
        }
    }

    let score_of = |feature: &str| -> f64 {
        ranking
            .entries
            .iter()
            .find(|(n, _)| n == feature)
            .map(|(_, s)| *s)
            .unwrap_or(0.0)
    };
    let mut ranked_groups: Vec<(&String, f64, usize)> = grouping
        .iter()
        .map(|(g, members)| {
            let total: f64 = members.iter().map(|m| score_of(m)).sum();
            let first_idx = members
                .iter()
                .filter_map(|m| cat.index_of(m))
                .min()
                .unwrap_or(usize::MAX);
            (g, total, first_idx)
        })
        .collect();
    ranked_groups.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.2.cmp(&b.2)));

    let mut ordered = Vec::new();
    let mut checkpoints = Vec::new();
    for (group, _, _) in &ranked_groups {
        let mut members = grouping[*group].clone();
        members.sort_by_key(|m| cat.index_of(m).unwrap());
        ordered.extend(members);
        checkpoints.push((format!("info_{group}"), ordered.len()));
    }
    run_manipulation_attack(model, test, benign_pool, &ordered, &checkpoints, seed, |_, _| {})
}

// ─── Monotone drift ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// All duration-valued features advance by d days; CCS features are
    /// recomputed from the shifted service times.
    Temporal,
    /// All restricted-control interaction counts increase by c.
    Interaction,
}

/// The feature names a drift of the given kind rewrites.
pub fn drift_features(cat: &FeatureCatalog, kind: DriftKind) -> Vec<String> {
    cat.features()
        .iter()
        .filter(|d| match kind {
            DriftKind::Temporal => {
                d.value_kind == ValueKind::DurationDays || d.value_kind == ValueKind::Score
            }
            DriftKind::Interaction => d.restricted_control,
        })
        .map(|d| d.name.clone())
        .collect()
}

/// Build the drifted matrix: malicious rows shifted by `amount`, benign
/// rows untouched.
pub fn drift_matrix<S: Scalar>(test: &FeatureMatrix<S>, kind: DriftKind, amount: u64) -> FeatureMatrix<S> {
    let cat = test.catalog().clone();
    let mut out = test.clone();
    let shift = S::from_count(amount);
    for i in test.malicious_indices() {
        match kind {
            DriftKind::Temporal => {
                for (col, desc) in cat.features().iter().enumerate() {
                    if desc.value_kind == ValueKind::DurationDays {
                        let v = out.value(i, col);
                        out.set_value(i, col, v + shift);
                    }
                }
                // CCS follows its shifted service time.
                for role in ["author", "maintainer", "contributor", "publisher"] {
                    let (Some(ccs_col), Some(service_col), Some(cpn_col)) = (
                        cat.index_of(&format!("{role}_CCS")),
                        cat.index_of(&format!("{role}_service_time")),
                        cat.index_of(&format!("{role}_CPN")),
                    ) else {
                        continue;
                    };
                    let service = out.value(i, service_col);
                    let cpn = out.value(i, cpn_col);
                    let score =
                        ccs(service, cpn, S::c(CCS_DEFAULT_BASE)).expect("base 2 is valid");
                    out.set_value(i, ccs_col, score);
                }
            }
            DriftKind::Interaction => {
                for (col, desc) in cat.features().iter().enumerate() {
                    if desc.restricted_control {
                        let v = out.value(i, col);
                        out.set_value(i, col, v + shift);
                    }
                }
            }
        }
    }
    out
}

fn drift_curve<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    kind: DriftKind,
    schedule: &[u64],
    label: &str,
) -> Result<AttackCurve, AdvError> {
    if schedule.windows(2).any(|w| w[1] < w[0]) {
        return Err(AdvError::BadSteps("schedule must be ascending".into()));
    }
    let baseline = model_metrics(model, test)?;
    let manipulated = drift_features(test.catalog(), kind);
    let mut steps = vec![AttackStep {
        step_id: "baseline".to_string(),
        manipulated: Vec::new(),
        metrics: baseline,
    }];
    for &amount in schedule {
        let shifted = drift_matrix(test, kind, amount);
        steps.push(AttackStep {
            step_id: format!("{label}_{amount}"),
            manipulated: manipulated.clone(),
            metrics: model_metrics(model, &shifted)?,
        });
    }
    Ok(AttackCurve { baseline, steps })
}

/// Advance every temporal feature of malicious rows by each d in the
/// schedule (days), recomputing CCS.
pub fn drift_temporal<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    day_schedule: &[u64],
) -> Result<AttackCurve, AdvError> {
    drift_curve(model, test, DriftKind::Temporal, day_schedule, "day")
}

/// Increase every interaction count of malicious rows by each c in the
/// schedule.
pub fn drift_interaction<S: Scalar>(
    model: &TrainedModel<S>,
    test: &FeatureMatrix<S>,
    count_schedule: &[u64],
) -> Result<AttackCurve, AdvError> {
    drift_curve(model, test, DriftKind::Interaction, count_schedule, "count")
}

// ─── Curve persistence ───────────────────────────────────────────────────────

pub const CURVE_CSV_HEADER: &str =
    "model,feature_set,attack_kind,step_id,manipulated_count,precision,recall,f1,accuracy,rmse,fp,fn";

pub fn write_curve_csv_rows<W: std::io::Write>(
    curve: &AttackCurve,
    model_name: &str,
    feature_set: &str,
    attack_kind: &str,
    mut w: W,
) -> std::io::Result<()> {
    for step in &curve.steps {
        let m = &step.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            model_name,
            feature_set,
            attack_kind,
            step.step_id,
            step.manipulated.len(),
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            m.rmse,
            m.fp,
            m.fn_
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::FeatureVector;
    use crate::models::test_support::{matrix, toy_catalog};
    use crate::models::{train, Algorithm, ModelParams, TrainConfig, TrainedModel};

    /// GLM whose only signal is the given feature column.
    fn single_feature_model(n_features: usize, active: usize, weight: f64) -> TrainedModel<f64> {
        let values: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..n_features).map(|c| (i * (c + 1)) as f64).collect())
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
        let m = matrix(&refs, &labels);
        let mut cfg = TrainConfig::new(Algorithm::Glm, 1);
        cfg.standardize = crate::models::StandardizeMode::Off;
        let mut model = train(&cfg, &m, None).unwrap();
        let mut weights = vec![0.0; n_features];
        weights[active] = weight;
        model.params = ModelParams::Glm {
            weights,
            bias: -weight * 9.5,
        };
        model
    }

    fn toy_matrix(n_rows: usize, n_features: usize) -> FeatureMatrix<f64> {
        let rows: Vec<FeatureVector<f64>> = (0..n_rows)
            .map(|i| FeatureVector {
                package_name: format!("r{i}"),
                values: (0..n_features)
                    .map(|c| ((i * 7 + c * 3) % 13) as f64 + if c == 1 { (i as f64) * 2.0 } else { 0.0 })
                    .collect(),
            })
            .collect();
        let labels: Vec<u8> = (0..n_rows).map(|i| u8::from(i % 2 == 0)).collect();
        FeatureMatrix::new(rows, labels, toy_catalog(n_features))
    }

    #[test]
    fn constant_model_scores_zero_in_catalog_order() {
        let x = toy_matrix(30, 4);
        let mut model = single_feature_model(4, 0, 0.0);
        model.params = ModelParams::Glm {
            weights: vec![0.0; 4],
            bias: 0.0,
        };
        for method in [RankMethod::Permutation, RankMethod::ExactShapley] {
            let ranking = rank_features(&model, &x, method, 1, 5).unwrap();
            assert!(ranking.entries.iter().all(|(_, s)| *s == 0.0));
            let names: Vec<&str> = ranking.entries.iter().map(|(n, _)| n.as_str()).collect();
            assert_eq!(names, vec!["f0", "f1", "f2", "f3"]);
        }
    }

    #[test]
    fn both_methods_find_the_single_active_feature() {
        // model thresholds feature 1 only; build data where feature 1 alone
        // explains the labels
        let values: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                vec![
                    ((i * 13) % 7) as f64,
                    if i % 2 == 0 { 10.0 } else { 0.0 },
                    ((i * 5) % 11) as f64,
                ]
            })
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let refs: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
        let x = matrix(&refs, &labels);

        let mut model = single_feature_model(3, 1, 0.0);
        model.params = ModelParams::Glm {
            weights: vec![0.0, 4.0, 0.0],
            bias: -20.0,
        };

        let perm = rank_features(&model, &x, RankMethod::Permutation, 3, 10).unwrap();
        let shap = rank_features(&model, &x, RankMethod::ExactShapley, 3, 10).unwrap();
        assert_eq!(perm.entries[0].0, "f1");
        assert_eq!(shap.entries[0].0, "f1");
        assert!(perm.entries[0].1 > perm.entries[1].1);
    }

    #[test]
    fn shapley_satisfies_efficiency() {
        let x = toy_matrix(24, 3);
        let model = single_feature_model(3, 1, 2.0);
        let phi = exact_shapley_values(&model, &x).unwrap();

        let full = model_accuracy(&model, &x).unwrap();
        let mut frozen = x.clone();
        for col in 0..3 {
            let mean = x.column(col).iter().sum::<f64>() / x.n_rows() as f64;
            for row in 0..x.n_rows() {
                frozen.set_value(row, col, mean);
            }
        }
        let empty = model_accuracy(&model, &frozen).unwrap();
        let sum: f64 = phi.iter().sum();
        assert!(
            (sum - (full - empty)).abs() < 1e-9,
            "efficiency violated: {sum} vs {}",
            full - empty
        );
    }

    #[test]
    fn exact_shapley_refuses_wide_catalogs() {
        let x = toy_matrix(10, 13);
        let model = single_feature_model(13, 1, 1.0);
        assert!(matches!(
            exact_shapley_values(&model, &x),
            Err(AdvError::TooManyFeaturesForExact(13))
        ));
    }

    #[test]
    fn permutation_ranking_is_seed_deterministic() {
        let x = toy_matrix(40, 5);
        let model = single_feature_model(5, 2, 3.0);
        let a = rank_features(&model, &x, RankMethod::Permutation, 9, 10).unwrap();
        let b = rank_features(&model, &x, RankMethod::Permutation, 9, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn manipulate_with_degenerate_pool_writes_the_constant() {
        let x = matrix(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]], &[1, 0, 1]);
        let pool = matrix(&[&[7.0, 7.0], &[7.0, 7.0]], &[0, 0]);
        let out = manipulate_feature(&x, "f0", &pool, 5).unwrap();
        assert_eq!(out.value(0, 0), 7.0);
        assert_eq!(out.value(2, 0), 7.0);
        // benign row and untouched column are bit-identical
        assert_eq!(out.value(1, 0), 3.0);
        assert_eq!(out.column(1), x.column(1));
    }

    #[test]
    fn manipulate_without_malicious_rows_is_identity() {
        let x = matrix(&[&[1.0], &[2.0]], &[0, 0]);
        let pool = matrix(&[&[9.0]], &[0]);
        let out = manipulate_feature(&x, "f0", &pool, 1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn manipulate_is_seed_deterministic() {
        let x = toy_matrix(30, 3);
        let pool = toy_matrix(20, 3);
        let a = manipulate_feature(&x, "f1", &pool, 11).unwrap();
        let b = manipulate_feature(&x, "f1", &pool, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn manipulate_unknown_feature_and_empty_pool() {
        let x = toy_matrix(10, 3);
        let pool = toy_matrix(10, 3);
        assert!(matches!(
            manipulate_feature(&x, "nope", &pool, 1),
            Err(AdvError::UnknownFeature(_))
        ));
        let empty_pool = matrix(&[&[1.0, 1.0, 1.0]], &[1]); // no benign rows
        assert!(matches!(
            manipulate_feature(&x, "f0", &empty_pool, 1),
            Err(AdvError::EmptyPool)
        ));
    }

    #[test]
    fn percentage_ceiling_rule_on_four_features() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        let curve = attack_percentage(&model, &x, &pool, &ranking, &[0.5], 7).unwrap();
        assert_eq!(curve.steps.len(), 2); // baseline + one checkpoint
        assert_eq!(curve.steps[1].manipulated.len(), 2);
    }

    #[test]
    fn percentage_full_fraction_covers_every_feature_in_ranking_order() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        let curve = attack_percentage(&model, &x, &pool, &ranking, &[1.0], 7).unwrap();
        assert_eq!(curve.steps[1].manipulated, ranking.names());
    }

    #[test]
    fn percentage_rejects_non_ascending_fractions() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        assert!(matches!(
            attack_percentage(&model, &x, &pool, &ranking, &[0.5, 0.5], 7),
            Err(AdvError::BadSteps(_))
        ));
        assert!(matches!(
            attack_percentage(&model, &x, &pool, &ranking, &[1.5], 7),
            Err(AdvError::BadSteps(_))
        ));
    }

    #[test]
    fn topn_full_depth_matches_percentage_at_one() {
        let x = toy_matrix(40, 5);
        let pool = toy_matrix(24, 5);
        let model = single_feature_model(5, 2, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 4, 5).unwrap();
        let seed = 99;
        let topn = attack_topn(&model, &x, &pool, &ranking, 5, seed).unwrap();
        let pct = attack_percentage(&model, &x, &pool, &ranking, &[1.0], seed).unwrap();
        assert_eq!(
            topn.steps.last().unwrap().metrics,
            pct.steps.last().unwrap().metrics
        );
    }

    #[test]
    fn topn_produces_n_steps_plus_baseline() {
        let x = toy_matrix(40, 5);
        let pool = toy_matrix(24, 5);
        let model = single_feature_model(5, 2, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 4, 5).unwrap();
        let curve = attack_topn(&model, &x, &pool, &ranking, 5, 1).unwrap();
        assert_eq!(curve.steps.len(), 6);
        assert_eq!(curve.steps[0].metrics, curve.baseline);
        // cumulative, non-shrinking manipulated sets
        for w in curve.steps.windows(2) {
            assert!(w[1].manipulated.starts_with(&w[0].manipulated));
        }
    }

    #[test]
    fn constant_model_curve_is_flat() {
        let x = toy_matrix(40, 5);
        let pool = toy_matrix(24, 5);
        let mut model = single_feature_model(5, 2, 3.0);
        model.params = ModelParams::Glm {
            weights: vec![0.0; 5],
            bias: 1.0,
        };
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 4, 5).unwrap();
        let curve = attack_topn(&model, &x, &pool, &ranking, 5, 1).unwrap();
        for step in &curve.steps {
            assert_eq!(step.metrics.accuracy, curve.baseline.accuracy);
        }
    }

    #[test]
    fn information_attack_groups_member_features_in_one_step() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        let mut grouping = BTreeMap::new();
        grouping.insert("alpha".to_string(), vec!["f0".to_string(), "f1".to_string()]);
        grouping.insert("beta".to_string(), vec!["f2".to_string(), "f3".to_string()]);
        let curve =
            attack_information(&model, &x, &pool, &grouping, &ranking, 3).unwrap();
        assert_eq!(curve.steps.len(), 3);
        // f1 carries the model, so group alpha goes first
        assert_eq!(curve.steps[1].step_id, "info_alpha");
        assert_eq!(curve.steps[1].manipulated.len(), 2);
        assert_eq!(curve.steps[2].manipulated.len(), 4);
    }

    #[test]
    fn canonical_grouping_bundles_author_features() {
        let cat = crate::catalog::catalog();
        let groups = information_grouping(&cat);
        assert_eq!(
            groups["authors"],
            vec!["author_exist", "author_name", "author_email"]
        );
        // groups partition the catalog
        let total: usize = groups.values().map(|v| v.len()).sum();
        assert_eq!(total, cat.len());
    }

    #[test]
    fn information_attack_rejects_incomplete_grouping() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        let mut grouping = BTreeMap::new();
        grouping.insert("alpha".to_string(), vec!["f0".to_string()]);
        assert!(matches!(
            attack_information(&model, &x, &pool, &grouping, &ranking, 3),
            Err(AdvError::IncompleteGrouping(_))
        ));
    }

    #[test]
    fn single_group_grouping_gives_one_post_baseline_step() {
        let x = toy_matrix(30, 4);
        let pool = toy_matrix(30, 4);
        let model = single_feature_model(4, 1, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 2, 5).unwrap();
        let mut grouping = BTreeMap::new();
        grouping.insert(
            "all".to_string(),
            vec!["f0".into(), "f1".into(), "f2".into(), "f3".into()],
        );
        let curve = attack_information(&model, &x, &pool, &grouping, &ranking, 3).unwrap();
        assert_eq!(curve.steps.len(), 2);
    }

    fn synthetic_model_and_matrix() -> (TrainedModel<f64>, FeatureMatrix<f64>) {
        use crate::catalog::catalog;
        use crate::dataset::{synthesize, SynthSpec};
        use crate::extract::extract_matrix;
        let spec = SynthSpec::new(60, 60, 31);
        let corpus = synthesize(&spec).unwrap();
        let m = extract_matrix::<f64>(&corpus, &catalog(), spec.reference_time).unwrap();
        let cfg = TrainConfig::new(Algorithm::Gbm, 5).with_param("trees", serde_json::json!(20));
        let model = train(&cfg, &m, None).unwrap();
        (model, m)
    }

    #[test]
    fn drift_day_zero_reproduces_baseline_exactly() {
        let (model, m) = synthetic_model_and_matrix();
        let curve = drift_temporal(&model, &m, &[0, 30]).unwrap();
        assert_eq!(curve.steps[1].metrics, curve.baseline);
        assert_eq!(curve.steps[1].step_id, "day_0");
        let curve = drift_interaction(&model, &m, &[0, 10]).unwrap();
        assert_eq!(curve.steps[1].metrics, curve.baseline);
    }

    #[test]
    fn drift_shifts_are_additive_and_monotone() {
        let (_, m) = synthetic_model_and_matrix();
        let cat = m.catalog().clone();
        let star = cat.index_of("star").unwrap();
        let age = cat.index_of("package_age").unwrap();
        let malicious = m.malicious_indices();
        let benign = m.benign_indices();

        let shifted = drift_matrix(&m, DriftKind::Interaction, 25);
        for &i in &malicious {
            assert_eq!(shifted.value(i, star), m.value(i, star) + 25.0);
        }
        for &i in &benign {
            assert_eq!(shifted.rows()[i].values, m.rows()[i].values);
        }

        // monotone features never decrease along an ascending day schedule
        let schedule = [0u64, 30, 90, 180, 360];
        let mut previous = m.clone();
        for &d in &schedule[1..] {
            let current = drift_matrix(&m, DriftKind::Temporal, d);
            for &i in &malicious {
                assert!(current.value(i, age) > m.value(i, age));
                for (col, desc) in cat.features().iter().enumerate() {
                    if desc.monotonic {
                        assert!(
                            current.value(i, col) >= previous.value(i, col),
                            "{} decreased at day {d}",
                            desc.name
                        );
                    }
                }
            }
            for &i in &benign {
                assert_eq!(current.rows()[i].values, m.rows()[i].values);
            }
            previous = current;
        }
    }

    #[test]
    fn drift_rejects_descending_schedules() {
        let (model, m) = synthetic_model_and_matrix();
        assert!(matches!(
            drift_temporal(&model, &m, &[30, 10]),
            Err(AdvError::BadSteps(_))
        ));
    }

    #[test]
    fn benign_rows_survive_attacks_bit_identical() {
        let x = toy_matrix(40, 5);
        let pool = toy_matrix(24, 5);
        let model = single_feature_model(5, 2, 3.0);
        let ranking = rank_features(&model, &x, RankMethod::Permutation, 4, 5).unwrap();
        let benign: Vec<usize> = x.benign_indices();
        let ordered = ranking.names();
        let checkpoints: Vec<(String, usize)> =
            (1..=5).map(|n| (format!("top_{n}"), n)).collect();
        run_manipulation_attack(&model, &x, &pool, &ordered, &checkpoints, 1, |m, _| {
            for &i in &benign {
                assert_eq!(m.rows()[i].values, x.rows()[i].values);
            }
        })
        .unwrap();
    }
}
