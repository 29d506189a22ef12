//! Run configuration: a TOML file plus flag overrides, hashed for artifact
//! provenance. Precedence is flags > config file > defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use memptec::adversarial::RankMethod;
use memptec::catalog::Selector;
use memptec::dataset::{FoldStrategy, Ratio};
use memptec::models::Algorithm;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0}: {1}")]
    Unreadable(PathBuf, String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Observation instant for extraction; defaults to the newest
    /// modified_time in the corpus so runs stay reproducible.
    pub reference_time: Option<DateTime<Utc>>,
    /// Worker threads (0 = library default). Results never depend on it.
    pub jobs: usize,
    pub dataset: DatasetConfig,
    pub evaluate: EvaluateConfig,
    pub attack: AttackConfig,
    pub drift: DriftConfig,
    pub fetch: FetchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            cache_dir: PathBuf::from(".memptec-cache"),
            output_dir: PathBuf::from("out"),
            reference_time: None,
            jobs: 0,
            dataset: DatasetConfig::default(),
            evaluate: EvaluateConfig::default(),
            attack: AttackConfig::default(),
            drift: DriftConfig::default(),
            fetch: FetchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Pre-labeled corpus (JSON Lines). Wins over the synthetic options.
    pub corpus: Option<PathBuf>,
    /// Separate corpora assembled at `ratio`.
    pub malicious_corpus: Option<PathBuf>,
    pub benign_corpus: Option<PathBuf>,
    pub ratio: Ratio,
    /// Synthetic corpus size when no corpus files are given.
    pub n_malicious: usize,
    pub n_benign: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            corpus: None,
            malicious_corpus: None,
            benign_corpus: None,
            ratio: Ratio::Balanced1to1,
            n_malicious: 3232,
            n_benign: 3232,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub feature_sets: Vec<String>,
    pub algorithms: Vec<String>,
    pub folds: usize,
    pub fold_strategy: FoldStrategy,
    /// Per-algorithm hyperparameter overrides, e.g. `glm = { epochs = 100 }`.
    pub hyperparams: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
    /// Feature names for the named baseline, overriding the built-in list.
    pub existing_tec: Option<Vec<String>>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            feature_sets: vec![
                "existing_tec".into(),
                "memptec_e".into(),
                "memptec_d".into(),
                "memptec".into(),
            ],
            algorithms: Algorithm::ALL.iter().map(|a| a.as_str().into()).collect(),
            folds: 5,
            fold_strategy: FoldStrategy::RepeatedHoldout,
            hyperparams: BTreeMap::new(),
            existing_tec: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Percentage,
    Topn,
    Information,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Percentage steps for the percentage attack, in percent.
    pub steps: Vec<f64>,
    pub top_n: usize,
    pub ranking: RankMethod,
    pub repeats: usize,
    pub feature_sets: Vec<String>,
    /// Manipulate every row's malicious entries instead of the test split.
    pub attack_all_rows: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            kind: AttackKind::Percentage,
            steps: (1..=10).map(|i| i as f64 * 10.0).collect(),
            top_n: 10,
            ranking: RankMethod::Permutation,
            repeats: 10,
            feature_sets: vec!["memptec_e".into(), "memptec".into()],
            attack_all_rows: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKindConfig {
    Temporal,
    Interaction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: DriftKindConfig,
    pub schedule: Vec<u64>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            kind: DriftKindConfig::Temporal,
            schedule: vec![0, 30, 90, 180, 360],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    pub offline: bool,
    pub max_concurrent: usize,
    pub requests_per_second: f64,
    pub retries: u32,
    pub max_age_hours: u64,
    pub registry_url: String,
    pub repo_api_url: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            offline: false,
            max_concurrent: 4,
            requests_per_second: 2.0,
            retries: 3,
            max_age_hours: 24,
            registry_url: memptec::ingest::DEFAULT_REGISTRY.to_string(),
            repo_api_url: memptec::ingest::DEFAULT_REPO_API.to_string(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<RunConfig, ConfigError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Unreadable(path.clone(), e.to_string()))?;
        toml::from_str(&text).map_err(|e| ConfigError::Unreadable(path.clone(), e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for set in self
            .evaluate
            .feature_sets
            .iter()
            .chain(&self.attack.feature_sets)
        {
            parse_feature_set(set, &self.evaluate.existing_tec)?;
        }
        for algo in &self.evaluate.algorithms {
            parse_algorithm(algo)?;
        }
        if self.evaluate.folds < 2 {
            return Err(ConfigError::Invalid("evaluate.folds must be >= 2".into()));
        }
        let mut prev = 0.0;
        for &s in &self.attack.steps {
            if s <= prev || s > 100.0 {
                return Err(ConfigError::Invalid(format!(
                    "attack.steps must ascend within (0, 100], got {:?}",
                    self.attack.steps
                )));
            }
            prev = s;
        }
        if self.attack.top_n == 0 {
            return Err(ConfigError::Invalid("attack.top_n must be >= 1".into()));
        }
        if self.drift.schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(ConfigError::Invalid(
                "drift.schedule must be ascending".into(),
            ));
        }
        if self.dataset.n_malicious == 0 || self.dataset.n_benign == 0 {
            return Err(ConfigError::Invalid(
                "dataset sizes must be positive".into(),
            ));
        }
        if self.fetch.max_concurrent == 0 || self.fetch.requests_per_second <= 0.0 {
            return Err(ConfigError::Invalid(
                "fetch.max_concurrent and fetch.requests_per_second must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Hash of the fully-resolved configuration; embedded in artifacts.
    /// Where artifacts land and how many threads run do not change what is
    /// computed, so those fields stay out of the hash.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output_dir = PathBuf::new();
        semantic.cache_dir = PathBuf::new();
        semantic.jobs = 0;
        let canonical = serde_json::to_string(&semantic).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

pub fn parse_feature_set(
    name: &str,
    existing_override: &Option<Vec<String>>,
) -> Result<Selector, ConfigError> {
    match name {
        "memptec" | "all" => Ok(Selector::All),
        "memptec_e" | "etm" => Ok(Selector::EtmOnly),
        "memptec_d" | "dtm" => Ok(Selector::DtmOnly),
        "existing_tec" => Ok(match existing_override {
            Some(names) => Selector::Named(names.clone()),
            None => Selector::ExistingTec,
        }),
        other => Err(ConfigError::Invalid(format!(
            "unknown feature set {other:?} (expected existing_tec, memptec_e, memptec_d or memptec)"
        ))),
    }
}

pub fn parse_algorithm(name: &str) -> Result<Algorithm, ConfigError> {
    Algorithm::parse(name)
        .ok_or_else(|| ConfigError::Invalid(format!("unknown algorithm {name:?}")))
}
