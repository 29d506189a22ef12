//! Pipeline stages behind the CLI subcommands: corpus assembly, feature
//! extraction, training, evaluation, attacks and drift, plus artifact
//! persistence with embedded provenance.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use memptec::adversarial::{
    attack_information, attack_percentage, attack_topn, drift_interaction, drift_temporal,
    information_grouping, rank_features, AttackCurve, ImportanceRanking, CURVE_CSV_HEADER,
};
use memptec::catalog::{catalog, subset, FeatureCatalog};
use memptec::dataset::{assemble, folds, split, synthesize, SplitSpec, SynthSpec};
use memptec::evaluation::{metrics, MetricSet, Report, REPORT_CSV_HEADER};
use memptec::extract::{extract_matrix, FeatureMatrix};
use memptec::ingest::{
    attach_stakeholder_history, load_fixture_corpus, write_corpus_jsonl, CachePolicy, FetchBudget,
    RegistryClient,
};
use memptec::models::{train, Algorithm, TrainConfig, TrainedModel};
use memptec::pmi::LabeledPmi;
use memptec::seeding::derive_seed;

use crate::config::{parse_algorithm, parse_feature_set, AttackKind, DriftKindConfig, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Ingest(#[from] memptec::ingest::IngestError),
    #[error(transparent)]
    Dataset(#[from] memptec::dataset::DatasetError),
    #[error(transparent)]
    Extract(#[from] memptec::extract::ExtractError),
    #[error(transparent)]
    Model(#[from] memptec::models::ModelError),
    #[error(transparent)]
    Eval(#[from] memptec::evaluation::EvalError),
    #[error(transparent)]
    Adversarial(#[from] memptec::adversarial::AdvError),
    #[error(transparent)]
    Catalog(#[from] memptec::catalog::CatalogError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Provenance stamp embedded in every artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn of(cfg: &RunConfig) -> RunMeta {
        RunMeta {
            tool_version: VERSION.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }

    pub fn csv_comment(&self) -> String {
        format!(
            "# memptec {} config={} seed={}",
            self.tool_version, self.config_hash, self.seed
        )
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(contents)?;
    Ok(())
}

// ─── Corpus assembly ─────────────────────────────────────────────────────────

/// Resolve the working corpus: an explicit corpus file, two corpora mixed
/// at the configured ratio, or the seeded synthetic generator.
pub fn resolve_corpus(cfg: &RunConfig) -> Result<Vec<LabeledPmi>> {
    let mut corpus = if let Some(path) = &cfg.dataset.corpus {
        load_fixture_corpus(path)?
    } else if let (Some(mal), Some(ben)) = (&cfg.dataset.malicious_corpus, &cfg.dataset.benign_corpus)
    {
        let malicious: Vec<_> = load_fixture_corpus(mal)?
            .into_iter()
            .map(|r| r.metadata)
            .collect();
        let benign: Vec<_> = load_fixture_corpus(ben)?
            .into_iter()
            .map(|r| r.metadata)
            .collect();
        assemble(&malicious, &benign, cfg.dataset.ratio, cfg.seed)?
    } else {
        let spec = SynthSpec::new(cfg.dataset.n_malicious, cfg.dataset.n_benign, cfg.seed);
        synthesize(&spec)?
    };

    // Loaded corpora usually lack cross-package stakeholder history; build
    // it here. Generator-supplied histories are kept as-is.
    if corpus
        .iter()
        .all(|r| r.metadata.stakeholder_history.is_empty())
    {
        let mut records: Vec<_> = corpus.iter().map(|r| r.metadata.clone()).collect();
        attach_stakeholder_history(&mut records);
        for (labeled, metadata) in corpus.iter_mut().zip(records) {
            labeled.metadata = metadata;
        }
    }
    Ok(corpus)
}

/// Observation instant: configured value, else the newest modified_time in
/// the corpus (falling back to the newest creation time).
pub fn resolve_reference_time(cfg: &RunConfig, corpus: &[LabeledPmi]) -> DateTime<Utc> {
    if let Some(t) = cfg.reference_time {
        return t;
    }
    corpus
        .iter()
        .filter_map(|r| r.metadata.modified_time)
        .chain(corpus.iter().map(|r| r.metadata.created_time))
        .max()
        .unwrap_or_else(Utc::now)
}

pub fn feature_catalog_for(cfg: &RunConfig, set: &str) -> Result<FeatureCatalog> {
    let selector = parse_feature_set(set, &cfg.evaluate.existing_tec)?;
    Ok(subset(&catalog(), &selector)?)
}

fn train_config(cfg: &RunConfig, algorithm: Algorithm, seed: u64) -> TrainConfig {
    let mut tc = TrainConfig::new(algorithm, seed);
    if let Some(overrides) = cfg.evaluate.hyperparams.get(algorithm.as_str()) {
        for (k, v) in overrides {
            tc.hyperparams.insert(k.clone(), v.clone());
        }
    }
    tc
}

// ─── Subcommand: synth ───────────────────────────────────────────────────────

pub fn run_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let spec = SynthSpec::new(cfg.dataset.n_malicious, cfg.dataset.n_benign, cfg.seed);
    let corpus = synthesize(&spec)?;
    let path = cfg.output_dir.join("corpus.jsonl");
    let mut buf = Vec::new();
    write_corpus_jsonl(&corpus, &mut buf)?;
    write_file(&path, &buf)?;
    let meta_path = cfg.output_dir.join("corpus.jsonl.meta.json");
    write_file(
        &meta_path,
        serde_json::to_string_pretty(&RunMeta::of(cfg)).unwrap().as_bytes(),
    )?;
    log::info!("wrote {} records to {}", corpus.len(), path.display());
    Ok(path)
}

// ─── Subcommand: extract ─────────────────────────────────────────────────────

pub fn run_extract(cfg: &RunConfig, feature_sets: &[String]) -> Result<Vec<PathBuf>> {
    let corpus = resolve_corpus(cfg)?;
    let reference = resolve_reference_time(cfg, &corpus);
    let meta = RunMeta::of(cfg);
    let mut written = Vec::new();
    for set in feature_sets {
        let cat = feature_catalog_for(cfg, set)?;
        let matrix: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference)?;
        let mut buf = Vec::new();
        writeln!(buf, "{}", meta.csv_comment())?;
        matrix.write_csv(&mut buf)?;
        let path = cfg.output_dir.join(format!("matrix_{set}.csv"));
        write_file(&path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

// ─── Subcommand: train ───────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub meta: RunMeta,
    pub algorithm: String,
    pub feature_set: String,
    pub model: TrainedModel<f64>,
}

pub fn run_train(cfg: &RunConfig, algorithms: &[String], feature_sets: &[String]) -> Result<Vec<PathBuf>> {
    let corpus = resolve_corpus(cfg)?;
    let reference = resolve_reference_time(cfg, &corpus);
    let meta = RunMeta::of(cfg);
    let mut written = Vec::new();
    for set in feature_sets {
        let cat = feature_catalog_for(cfg, set)?;
        let matrix: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference)?;
        let indices = split(matrix.labels(), &SplitSpec::new(cfg.seed))?;
        let train_m = matrix.select_rows(&indices.train_idx);
        let valid_m = matrix.select_rows(&indices.valid_idx);
        let splits_path = cfg.output_dir.join(format!("splits_{set}.json"));
        write_file(
            &splits_path,
            serde_json::to_string(&indices).unwrap().as_bytes(),
        )?;
        for algo_name in algorithms {
            let algorithm = parse_algorithm(algo_name)?;
            let tc = train_config(cfg, algorithm, derive_seed(cfg.seed, "train", 0));
            let model = train(&tc, &train_m, Some(&valid_m))?;
            let artifact = ModelArtifact {
                meta: meta.clone(),
                algorithm: algorithm.as_str().to_string(),
                feature_set: set.clone(),
                model,
            };
            let path = cfg
                .output_dir
                .join(format!("model_{algo_name}_{set}.json"));
            write_file(&path, serde_json::to_string(&artifact).unwrap().as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

// ─── Subcommand: evaluate ────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub meta: RunMeta,
    pub dataset: String,
    pub reference_time: DateTime<Utc>,
    pub reports: Vec<Report>,
}

fn dataset_label(cfg: &RunConfig) -> String {
    if let Some(path) = &cfg.dataset.corpus {
        format!("corpus:{}", path.display())
    } else if cfg.dataset.malicious_corpus.is_some() {
        format!("assembled:{:?}", cfg.dataset.ratio)
    } else {
        format!(
            "synthetic:{}+{}",
            cfg.dataset.n_malicious, cfg.dataset.n_benign
        )
    }
}

/// Train/evaluate every (feature set × algorithm × fold) cell.
pub fn run_evaluate(cfg: &RunConfig) -> Result<EvaluationArtifact> {
    let corpus = resolve_corpus(cfg)?;
    let reference = resolve_reference_time(cfg, &corpus);
    let meta = RunMeta::of(cfg);

    // One split family for the whole evaluation: labels are identical
    // across feature sets.
    let probe_cat = feature_catalog_for(cfg, &cfg.evaluate.feature_sets[0])?;
    let probe: FeatureMatrix<f64> = extract_matrix(&corpus, &probe_cat, reference)?;
    let split_family = folds(
        probe.labels(),
        &SplitSpec::new(cfg.seed),
        cfg.evaluate.folds,
        cfg.seed,
        cfg.evaluate.fold_strategy,
    )?;
    write_file(
        &cfg.output_dir.join("splits.json"),
        serde_json::to_string(&split_family).unwrap().as_bytes(),
    )?;

    let mut reports = Vec::new();
    for set in &cfg.evaluate.feature_sets {
        let cat = feature_catalog_for(cfg, set)?;
        let matrix: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference)?;
        for algo_name in &cfg.evaluate.algorithms {
            let algorithm = parse_algorithm(algo_name)?;
            let fold_metrics: Vec<std::result::Result<MetricSet, PipelineError>> = split_family
                .par_iter()
                .enumerate()
                .map(|(fold, indices)| {
                    let train_m = matrix.select_rows(&indices.train_idx);
                    let valid_m = matrix.select_rows(&indices.valid_idx);
                    let test_m = matrix.select_rows(&indices.test_idx);
                    let tc = train_config(
                        cfg,
                        algorithm,
                        derive_seed(cfg.seed, "train-fold", fold as u64),
                    );
                    let model = train(&tc, &train_m, Some(&valid_m))?;
                    let proba = model.predict_proba(&test_m)?;
                    Ok(metrics(&proba, test_m.labels(), DECISION_THRESHOLD)?)
                })
                .collect();
            let fold_metrics: Vec<MetricSet> =
                fold_metrics.into_iter().collect::<Result<Vec<_>>>()?;
            reports.push(Report::new(
                &dataset_label(cfg),
                set,
                algorithm.as_str(),
                fold_metrics,
            ));
        }
    }

    let artifact = EvaluationArtifact {
        meta: meta.clone(),
        dataset: dataset_label(cfg),
        reference_time: reference,
        reports,
    };
    write_file(
        &cfg.output_dir.join("report.json"),
        serde_json::to_string_pretty(&artifact).unwrap().as_bytes(),
    )?;

    let mut csv = Vec::new();
    writeln!(csv, "{}", meta.csv_comment())?;
    writeln!(csv, "{REPORT_CSV_HEADER}")?;
    for report in &artifact.reports {
        memptec::evaluation::write_report_csv_rows(report, &mut csv)?;
    }
    write_file(&cfg.output_dir.join("report.csv"), &csv)?;
    Ok(artifact)
}

// ─── Subcommands: attack & drift ─────────────────────────────────────────────

pub struct PreparedAttack {
    pub feature_set: String,
    pub algorithm: Algorithm,
    pub model: TrainedModel<f64>,
    pub target: FeatureMatrix<f64>,
    pub pool: FeatureMatrix<f64>,
}

/// Train fold-0 models and slice the attack target / benign pool per the
/// configuration.
pub fn prepare_attacks(cfg: &RunConfig, feature_sets: &[String]) -> Result<Vec<PreparedAttack>> {
    let corpus = resolve_corpus(cfg)?;
    let reference = resolve_reference_time(cfg, &corpus);
    let mut prepared = Vec::new();
    for set in feature_sets {
        let cat = feature_catalog_for(cfg, set)?;
        let matrix: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference)?;
        let indices = split(matrix.labels(), &SplitSpec::new(cfg.seed))?;
        let train_m = matrix.select_rows(&indices.train_idx);
        let valid_m = matrix.select_rows(&indices.valid_idx);
        let test_m = matrix.select_rows(&indices.test_idx);
        let target = if cfg.attack.attack_all_rows {
            matrix.clone()
        } else {
            test_m
        };
        let pool = target.select_rows(&target.benign_indices());
        for algo_name in &cfg.evaluate.algorithms {
            let algorithm = parse_algorithm(algo_name)?;
            let tc = train_config(cfg, algorithm, derive_seed(cfg.seed, "train-fold", 0));
            let model = train(&tc, &train_m, Some(&valid_m))?;
            prepared.push(PreparedAttack {
                feature_set: set.clone(),
                algorithm,
                model,
                target: target.clone(),
                pool: pool.clone(),
            });
        }
    }
    Ok(prepared)
}

pub fn ranking_for(cfg: &RunConfig, p: &PreparedAttack) -> Result<ImportanceRanking> {
    Ok(rank_features(
        &p.model,
        &p.target,
        cfg.attack.ranking,
        derive_seed(cfg.seed, "ranking", 0),
        cfg.attack.repeats,
    )?)
}

pub fn run_attack(cfg: &RunConfig) -> Result<PathBuf> {
    let prepared = prepare_attacks(cfg, &cfg.attack.feature_sets.clone())?;
    let meta = RunMeta::of(cfg);
    let kind_name = match cfg.attack.kind {
        AttackKind::Percentage => "percentage",
        AttackKind::Topn => "topn",
        AttackKind::Information => "information",
    };

    let curves: Vec<std::result::Result<(String, Algorithm, AttackCurve), PipelineError>> =
        prepared
            .par_iter()
            .map(|p| {
                let ranking = ranking_for(cfg, p)?;
                let attack_seed = derive_seed(cfg.seed, "attack", 0);
                let curve = match cfg.attack.kind {
                    AttackKind::Percentage => {
                        let fractions: Vec<f64> =
                            cfg.attack.steps.iter().map(|s| s / 100.0).collect();
                        attack_percentage(
                            &p.model, &p.target, &p.pool, &ranking, &fractions, attack_seed,
                        )?
                    }
                    AttackKind::Topn => attack_topn(
                        &p.model,
                        &p.target,
                        &p.pool,
                        &ranking,
                        cfg.attack.top_n.min(ranking.entries.len()),
                        attack_seed,
                    )?,
                    AttackKind::Information => {
                        let grouping = information_grouping(p.target.catalog());
                        attack_information(
                            &p.model, &p.target, &p.pool, &grouping, &ranking, attack_seed,
                        )?
                    }
                };
                Ok((p.feature_set.clone(), p.algorithm, curve))
            })
            .collect();

    let mut csv = Vec::new();
    writeln!(csv, "{}", meta.csv_comment())?;
    writeln!(csv, "{CURVE_CSV_HEADER}")?;
    for item in curves {
        let (set, algorithm, curve) = item?;
        memptec::adversarial::write_curve_csv_rows(
            &curve,
            algorithm.as_str(),
            &set,
            kind_name,
            &mut csv,
        )?;
    }
    let path = cfg.output_dir.join(format!("curves_{kind_name}.csv"));
    write_file(&path, &csv)?;
    Ok(path)
}

pub fn run_drift(cfg: &RunConfig) -> Result<PathBuf> {
    let prepared = prepare_attacks(cfg, &["memptec".to_string()])?;
    let meta = RunMeta::of(cfg);
    let (kind_name, schedule) = match cfg.drift.kind {
        DriftKindConfig::Temporal => ("temporal", cfg.drift.schedule.clone()),
        DriftKindConfig::Interaction => ("interaction", cfg.drift.schedule.clone()),
    };

    let curves: Vec<std::result::Result<(String, Algorithm, AttackCurve), PipelineError>> =
        prepared
            .par_iter()
            .map(|p| {
                let curve = match cfg.drift.kind {
                    DriftKindConfig::Temporal => drift_temporal(&p.model, &p.target, &schedule)?,
                    DriftKindConfig::Interaction => {
                        drift_interaction(&p.model, &p.target, &schedule)?
                    }
                };
                Ok((p.feature_set.clone(), p.algorithm, curve))
            })
            .collect();

    let mut csv = Vec::new();
    writeln!(csv, "{}", meta.csv_comment())?;
    writeln!(csv, "{CURVE_CSV_HEADER}")?;
    for item in curves {
        let (set, algorithm, curve) = item?;
        memptec::adversarial::write_curve_csv_rows(
            &curve,
            algorithm.as_str(),
            &set,
            &format!("drift_{kind_name}"),
            &mut csv,
        )?;
    }
    let path = cfg.output_dir.join(format!("curves_drift_{kind_name}.csv"));
    write_file(&path, &csv)?;
    Ok(path)
}

// ─── Subcommand: ingest ──────────────────────────────────────────────────────

pub struct IngestArgs {
    pub packages: Vec<String>,
    pub with_interactions: bool,
    pub label: u8,
    pub out: Option<PathBuf>,
    pub token: Option<String>,
}

pub fn run_ingest(cfg: &RunConfig, args: &IngestArgs) -> Result<usize> {
    let policy = if cfg.fetch.offline {
        CachePolicy::offline(&cfg.cache_dir)
    } else {
        let mut p = CachePolicy::cache_first(&cfg.cache_dir);
        p.max_age = std::time::Duration::from_secs(cfg.fetch.max_age_hours * 3600);
        p
    };
    let budget = FetchBudget {
        max_concurrent: cfg.fetch.max_concurrent,
        requests_per_second: cfg.fetch.requests_per_second,
        retries: cfg.fetch.retries,
    };
    let client = RegistryClient::with_endpoints(
        &cfg.fetch.registry_url,
        &cfg.fetch.repo_api_url,
        policy,
        budget,
        args.token.clone(),
    );

    let results = client.fetch_many(&args.packages);
    let mut corpus = Vec::new();
    let mut failures = 0usize;
    for (name, outcome) in results {
        match outcome {
            Ok(mut pm) => {
                if args.with_interactions {
                    if let Some(repo) = pm.github_link.clone() {
                        match client.fetch_repo_interactions(&repo) {
                            Ok(counts) => pm.interactions = counts,
                            Err(e) => log::warn!("{name}: interactions unavailable: {e}"),
                        }
                    }
                }
                corpus.push(LabeledPmi {
                    metadata: pm,
                    label: args.label,
                });
            }
            Err(e) => {
                failures += 1;
                log::error!("{name}: {e}");
            }
        }
    }
    if let Some(out) = &args.out {
        let mut records: Vec<_> = corpus.iter().map(|r| r.metadata.clone()).collect();
        attach_stakeholder_history(&mut records);
        for (labeled, metadata) in corpus.iter_mut().zip(records) {
            labeled.metadata = metadata;
        }
        let mut buf = Vec::new();
        write_corpus_jsonl(&corpus, &mut buf)?;
        write_file(out, &buf)?;
    }
    if failures > 0 {
        return Err(PipelineError::Other(format!(
            "{failures} of {} fetches failed",
            args.packages.len()
        )));
    }
    Ok(corpus.len())
}

// ─── Subcommand: report ──────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
pub struct Summary {
    pub meta: RunMeta,
    pub evaluation: Option<serde_json::Value>,
    pub curves: BTreeMap<String, Vec<String>>,
}

/// Merge the run directory's evaluation report and attack curves into one
/// summary document.
pub fn run_report(cfg: &RunConfig) -> Result<PathBuf> {
    let meta = RunMeta::of(cfg);
    let evaluation = std::fs::read_to_string(cfg.output_dir.join("report.json"))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());
    let mut curves = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(&cfg.output_dir) {
        let mut names: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("curves_") && n.ends_with(".csv"))
            })
            .collect();
        names.sort();
        for path in names {
            let text = std::fs::read_to_string(&path)?;
            curves.insert(
                path.file_name().unwrap().to_string_lossy().to_string(),
                text.lines().map(str::to_string).collect(),
            );
        }
    }
    let summary = Summary {
        meta,
        evaluation,
        curves,
    };
    let path = cfg.output_dir.join("summary.json");
    write_file(&path, serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
    Ok(path)
}

// ─── Subcommand: catalog ─────────────────────────────────────────────────────

pub fn run_catalog(cfg: &RunConfig, extended: bool, out: Option<&PathBuf>) -> Result<()> {
    let cat = if extended {
        memptec::catalog::catalog_extended()
    } else {
        catalog()
    };
    let mut buf = Vec::new();
    writeln!(buf, "{}", RunMeta::of(cfg).csv_comment())?;
    cat.write_csv(&mut buf)?;
    match out {
        Some(path) => write_file(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
