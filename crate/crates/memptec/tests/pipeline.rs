//! Library-level pipeline: synthetic corpus → features → models → attack,
//! exercised through the public API at desk scale.

use memptec::adversarial::{attack_topn, rank_features, RankMethod};
use memptec::catalog::{catalog, subset, Selector};
use memptec::dataset::{split, synthesize, SplitSpec, SynthSpec};
use memptec::evaluation::metrics;
use memptec::extract::extract_matrix;
use memptec::ingest::{load_fixture_corpus, write_corpus_jsonl};
use memptec::models::{train, Algorithm, TrainConfig, TrainedModel};
use memptec::FeatureMatrix64;

#[test]
fn synthetic_corpus_trains_and_survives_an_attack() {
    let spec = SynthSpec::new(120, 120, 9);
    let corpus = synthesize(&spec).unwrap();
    let cat = catalog();
    let matrix: FeatureMatrix64 = extract_matrix(&corpus, &cat, spec.reference_time).unwrap();
    assert_eq!(matrix.n_rows(), 240);
    assert_eq!(matrix.n_features(), 56);

    let indices = split(matrix.labels(), &SplitSpec::new(4)).unwrap();
    let train_m = matrix.select_rows(&indices.train_idx);
    let valid_m = matrix.select_rows(&indices.valid_idx);
    let test_m = matrix.select_rows(&indices.test_idx);

    let model = train(&TrainConfig::new(Algorithm::Gbm, 2), &train_m, Some(&valid_m)).unwrap();
    let proba = model.predict_proba(&test_m).unwrap();
    let base = metrics(&proba, test_m.labels(), 0.5).unwrap();
    assert!(base.accuracy > 0.9, "baseline accuracy {}", base.accuracy);

    let ranking = rank_features(&model, &test_m, RankMethod::Permutation, 5, 3).unwrap();
    let pool = test_m.select_rows(&test_m.benign_indices());
    let curve = attack_topn(&model, &test_m, &pool, &ranking, 5, 5).unwrap();
    assert_eq!(curve.steps.len(), 6);
    // degradation is possible but metrics stay well-formed
    for step in &curve.steps {
        assert!(step.metrics.accuracy >= 0.0 && step.metrics.accuracy <= 1.0);
    }
}

#[test]
fn corpus_roundtrips_through_jsonl_with_identical_features() {
    let spec = SynthSpec::new(30, 30, 17);
    let corpus = synthesize(&spec).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let mut buf = Vec::new();
    write_corpus_jsonl(&corpus, &mut buf).unwrap();
    std::fs::write(&path, &buf).unwrap();
    let reloaded = load_fixture_corpus(&path).unwrap();
    assert_eq!(corpus, reloaded);

    let cat = subset(&catalog(), &Selector::DtmOnly).unwrap();
    let a: FeatureMatrix64 = extract_matrix(&corpus, &cat, spec.reference_time).unwrap();
    let b: FeatureMatrix64 = extract_matrix(&reloaded, &cat, spec.reference_time).unwrap();
    assert_eq!(a, b);
}

#[test]
fn f32_and_f64_pipelines_agree_on_labels() {
    let spec = SynthSpec::new(40, 40, 23);
    let corpus = synthesize(&spec).unwrap();
    let cat = catalog();
    let m64: FeatureMatrix64 = extract_matrix(&corpus, &cat, spec.reference_time).unwrap();
    let m32: memptec::FeatureMatrix32 = extract_matrix(&corpus, &cat, spec.reference_time).unwrap();

    let model64 = train(&TrainConfig::new(Algorithm::Drf, 6), &m64, None).unwrap();
    let model32: TrainedModel<f32> = train(&TrainConfig::new(Algorithm::Drf, 6), &m32, None).unwrap();
    let l64 = model64.predict_label(&m64, 0.5).unwrap();
    let l32 = model32.predict_label(&m32, 0.5).unwrap();
    let agree = l64.iter().zip(&l32).filter(|(a, b)| a == b).count();
    assert!(
        agree as f64 / l64.len() as f64 > 0.95,
        "precisions diverge: {agree}/{} labels agree",
        l64.len()
    );
}
