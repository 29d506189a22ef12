//! Metric suite: confusion counts, precision/recall/F1/accuracy, MSE/RMSE on
//! probabilities, and mean ± standard error aggregation over repeated runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("no rows to evaluate")]
    Empty,
}

/// Positive class is malicious (label 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// The full metric set for one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub mse: f64,
    pub rmse: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Tally prediction/label agreement.
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionCounts, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => counts.tp += 1,
            (1, 0) => counts.fp += 1,
            (0, 1) => counts.fn_ += 1,
            _ => counts.tn += 1,
        }
    }
    Ok(counts)
}

fn ratio(num: u64, den: u64) -> f64 {
    // Zero denominators yield 0 rather than NaN so attack curves stay
    // plottable when a model collapses.
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from predicted probabilities at a decision threshold.
/// Labels are 1 when probability ≥ threshold; MSE is computed on the
/// probabilities themselves, not the hard labels.
pub fn metrics<S: Scalar>(
    proba: &[S],
    truth: &[u8],
    threshold: f64,
) -> Result<MetricSet, EvalError> {
    if proba.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: proba.len(),
            right: truth.len(),
        });
    }
    if proba.is_empty() {
        return Err(EvalError::Empty);
    }
    let pred: Vec<u8> = proba
        .iter()
        .map(|p| if p.as_f64() >= threshold { 1 } else { 0 })
        .collect();
    let c = confusion(&pred, truth)?;

    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let n = truth.len() as f64;
    let accuracy = (c.tp + c.tn) as f64 / n;
    let mse = proba
        .iter()
        .zip(truth)
        .map(|(p, &t)| {
            let d = p.as_f64() - t as f64;
            d * d
        })
        .sum::<f64>()
        / n;

    Ok(MetricSet {
        precision,
        recall,
        f1,
        accuracy,
        mse,
        rmse: mse.sqrt(),
        fp: c.fp,
        fn_: c.fn_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub standard_error: f64,
}

/// Aggregate repeated runs to mean and standard error per metric
/// (sample standard deviation over √k; a single run yields SE 0).
pub fn aggregate(runs: &[MetricSet]) -> BTreeMap<String, MeanSe> {
    assert!(!runs.is_empty(), "aggregate needs at least one run");
    if runs.len() == 1 {
        log::warn!("aggregating a single run: standard errors are 0");
    }
    let fields: [(&str, fn(&MetricSet) -> f64); 8] = [
        ("precision", |m| m.precision),
        ("recall", |m| m.recall),
        ("f1", |m| m.f1),
        ("accuracy", |m| m.accuracy),
        ("mse", |m| m.mse),
        ("rmse", |m| m.rmse),
        ("fp", |m| m.fp as f64),
        ("fn", |m| m.fn_ as f64),
    ];
    let k = runs.len() as f64;
    fields
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = runs.iter().map(get).collect();
            let mean = values.iter().sum::<f64>() / k;
            let standard_error = if runs.len() < 2 {
                0.0
            } else {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                var.sqrt() / k.sqrt()
            };
            (
                name.to_string(),
                MeanSe {
                    mean,
                    standard_error,
                },
            )
        })
        .collect()
}

/// One evaluation report: per-fold metrics plus their aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub feature_set: String,
    pub algorithm: String,
    pub folds: Vec<MetricSet>,
    pub mean_se: BTreeMap<String, MeanSe>,
}

impl Report {
    pub fn new(dataset: &str, feature_set: &str, algorithm: &str, folds: Vec<MetricSet>) -> Self {
        let mean_se = aggregate(&folds);
        Report {
            dataset: dataset.to_string(),
            feature_set: feature_set.to_string(),
            algorithm: algorithm.to_string(),
            folds,
            mean_se,
        }
    }
}

pub const REPORT_CSV_HEADER: &str =
    "dataset,feature_set,algorithm,fold,precision,recall,f1,accuracy,mse,rmse,fp,fn";

/// Flat CSV rows for spreadsheet import: one row per fold plus a `mean` row.
pub fn write_report_csv_rows<W: std::io::Write>(report: &Report, mut w: W) -> std::io::Result<()> {
    for (i, m) in report.folds.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            report.dataset,
            report.feature_set,
            report.algorithm,
            i,
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            m.mse,
            m.rmse,
            m.fp,
            m.fn_
        )?;
    }
    let g = |k: &str| report.mean_se[k].mean;
    writeln!(
        w,
        "{},{},{},mean,{},{},{},{},{},{},{},{}",
        report.dataset,
        report.feature_set,
        report.algorithm,
        g("precision"),
        g("recall"),
        g("f1"),
        g("accuracy"),
        g("mse"),
        g("rmse"),
        g("fp"),
        g("fn")
    )
}
