//! Corpus assembly at fixed class ratios, seeded 70:10:20 splits with
//! repeated resampling, and a synthetic corpus generator with a
//! controllable per-feature signal profile.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{catalog, FeatureCatalog, ValueKind};
use crate::pmi::{
    InteractionCounts, LabeledPmi, PackageMetadata, Person, StakeholderRecord, StakeholderRole,
};
use crate::seeding::rng_for;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset too small: {0} rows (need at least 10)")]
    TooSmall(usize),
    #[error("split fractions must sum to 1, got {0}")]
    BadFractions(f64),
    #[error("need {need} benign packages for the requested ratio, have {have}")]
    InsufficientBenign { need: usize, have: usize },
    #[error("fold count must be at least 2, got {0}")]
    BadK(usize),
    #[error("bad signal profile: {0}")]
    BadProfile(String),
}

// ─── Assembly ────────────────────────────────────────────────────────────────

/// Malicious-to-benign mixing ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    Balanced1to1,
    Imbalanced1to10,
}

impl Ratio {
    pub fn benign_per_malicious(&self) -> usize {
        match self {
            Ratio::Balanced1to1 => 1,
            Ratio::Imbalanced1to10 => 10,
        }
    }
}

/// Keep every malicious package, sample benign without replacement to the
/// exact ratio, and shuffle the combined order by seed.
pub fn assemble(
    malicious: &[PackageMetadata],
    benign: &[PackageMetadata],
    ratio: Ratio,
    seed: u64,
) -> Result<Vec<LabeledPmi>, DatasetError> {
    let need = malicious.len() * ratio.benign_per_malicious();
    if benign.len() < need {
        return Err(DatasetError::InsufficientBenign {
            need,
            have: benign.len(),
        });
    }
    let mut rng = rng_for(seed, "assemble-benign", 0);
    let mut benign_idx: Vec<usize> = (0..benign.len()).collect();
    benign_idx.shuffle(&mut rng);
    benign_idx.truncate(need);

    let mut out: Vec<LabeledPmi> = malicious
        .iter()
        .map(|m| LabeledPmi {
            metadata: m.clone(),
            label: 1,
        })
        .chain(benign_idx.iter().map(|&i| LabeledPmi {
            metadata: benign[i].clone(),
            label: 0,
        }))
        .collect();
    let mut order_rng = rng_for(seed, "assemble-order", 0);
    out.shuffle(&mut order_rng);
    Ok(out)
}

// ─── Splits ──────────────────────────────────────────────────────────────────

/// 70:10:20 split specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.70,
            valid_frac: 0.10,
            test_frac: 0.20,
            stratified: true,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let sum = self.train_frac + self.valid_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9
            || self.train_frac <= 0.0
            || self.valid_frac < 0.0
            || self.test_frac <= 0.0
        {
            return Err(DatasetError::BadFractions(sum));
        }
        Ok(())
    }
}

/// A persisted split: row indices per partition. Replaying the same spec
/// reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Largest-remainder apportionment of `n` into the three fractions, so the
/// parts always sum to exactly `n`.
fn apportion(n: usize, fracs: [f64; 3]) -> [usize; 3] {
    let targets: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = targets[a] - targets[a].floor();
        let rb = targets[b] - targets[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Split row indices into train/valid/test, stratified by label when asked.
pub fn split(labels: &[u8], spec: &SplitSpec) -> Result<SplitIndices, DatasetError> {
    spec.validate()?;
    if labels.len() < 10 {
        return Err(DatasetError::TooSmall(labels.len()));
    }
    let fracs = [spec.train_frac, spec.valid_frac, spec.test_frac];
    let pools: Vec<Vec<usize>> = if spec.stratified {
        let mut benign = Vec::new();
        let mut malicious = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == 1 {
                malicious.push(i)
            } else {
                benign.push(i)
            }
        }
        [benign, malicious].into_iter().filter(|p| !p.is_empty()).collect()
    } else {
        vec![(0..labels.len()).collect()]
    };

    let mut out = SplitIndices {
        seed: spec.seed,
        train_idx: Vec::new(),
        valid_idx: Vec::new(),
        test_idx: Vec::new(),
    };
    for (class, mut pool) in pools.into_iter().enumerate() {
        let mut rng = rng_for(spec.seed, "split-pool", class as u64);
        pool.shuffle(&mut rng);
        let [n_train, n_valid, _] = apportion(pool.len(), fracs);
        out.train_idx.extend(&pool[..n_train]);
        out.valid_idx.extend(&pool[n_train..n_train + n_valid]);
        out.test_idx.extend(&pool[n_train + n_valid..]);
    }
    out.train_idx.sort_unstable();
    out.valid_idx.sort_unstable();
    out.test_idx.sort_unstable();
    Ok(out)
}

/// How repeated evaluation folds are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldStrategy {
    /// k independent re-seeded 70:10:20 splits (default).
    RepeatedHoldout,
    /// Stratified k-fold partition; each fold serves once as the test set
    /// and the remainder is split train:valid at the configured proportions.
    KFold,
}

/// `k` seeded splits with fold seeds `master_seed + fold_index`.
pub fn repeated_splits(
    labels: &[u8],
    base: &SplitSpec,
    k: usize,
    master_seed: u64,
) -> Result<Vec<SplitIndices>, DatasetError> {
    if k < 2 {
        return Err(DatasetError::BadK(k));
    }
    (0..k)
        .map(|i| {
            let spec = SplitSpec {
                seed: master_seed.wrapping_add(i as u64),
                ..*base
            };
            split(labels, &spec)
        })
        .collect()
}

/// Stratified k-fold partition variant.
pub fn kfold_splits(
    labels: &[u8],
    base: &SplitSpec,
    k: usize,
    master_seed: u64,
) -> Result<Vec<SplitIndices>, DatasetError> {
    if k < 2 {
        return Err(DatasetError::BadK(k));
    }
    base.validate()?;
    if labels.len() < 10 {
        return Err(DatasetError::TooSmall(labels.len()));
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in 0..=1u8 {
        let mut pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = rng_for(master_seed, "kfold-pool", class as u64);
        pool.shuffle(&mut rng);
        for (j, idx) in pool.into_iter().enumerate() {
            folds[j % k].push(idx);
        }
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let test_idx: Vec<usize> = {
            let mut t = folds[i].clone();
            t.sort_unstable();
            t
        };
        let mut rest: Vec<usize> = (0..k)
            .filter(|&j| j != i)
            .flat_map(|j| folds[j].iter().copied())
            .collect();
        let mut rng = rng_for(master_seed, "kfold-tv", i as u64);
        rest.shuffle(&mut rng);
        let train_share = base.train_frac / (base.train_frac + base.valid_frac);
        let n_train = (rest.len() as f64 * train_share).round() as usize;
        let mut train_idx = rest[..n_train].to_vec();
        let mut valid_idx = rest[n_train..].to_vec();
        train_idx.sort_unstable();
        valid_idx.sort_unstable();
        out.push(SplitIndices {
            seed: master_seed.wrapping_add(i as u64),
            train_idx,
            valid_idx,
            test_idx,
        });
    }
    Ok(out)
}

pub fn folds(
    labels: &[u8],
    base: &SplitSpec,
    k: usize,
    master_seed: u64,
    strategy: FoldStrategy,
) -> Result<Vec<SplitIndices>, DatasetError> {
    match strategy {
        FoldStrategy::RepeatedHoldout => repeated_splits(labels, base, k, master_seed),
        FoldStrategy::KFold => kfold_splits(labels, base, k, master_seed),
    }
}

// ─── Synthetic corpus ────────────────────────────────────────────────────────

/// Distribution over one feature's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dist {
    Constant(f64),
    Bernoulli {
        p: f64,
    },
    UniformInt {
        lo: u64,
        hi: u64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Mixture switched by a shared per-package group latent. The group
    /// activates at most one member; every other member is dormant in one
    /// of two sub-styles drawn once per member, so all features gated on
    /// one member stay coherent within a package.
    GroupGated {
        group: String,
        member: usize,
        active: Box<Dist>,
        dormant_a: Box<Dist>,
        dormant_b: Box<Dist>,
    },
    /// Value determined by generated content or other drawn fields
    /// (serialized lengths, CCS).
    Derived,
}

/// Realized archetype state of one group within one package.
#[derive(Debug, Clone)]
pub struct GroupState {
    pub active: Option<usize>,
    /// Per member: which dormant sub-style applies when not active.
    pub substyle_a: Vec<bool>,
    /// Establishment level of the active member (1.0 = fully established).
    pub activity: f64,
}

impl Dist {
    fn sample(&self, state: &BTreeMap<String, GroupState>, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Dist::Constant(v) => *v,
            Dist::Bernoulli { p } => {
                if rng.random_bool(*p) {
                    1.0
                } else {
                    0.0
                }
            }
            Dist::UniformInt { lo, hi } => rng.random_range(*lo..=*hi) as f64,
            Dist::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            Dist::GroupGated {
                group,
                member,
                active,
                dormant_a,
                dormant_b,
            } => {
                let group_state = &state[group];
                if group_state.active == Some(*member) {
                    active.sample(state, rng) * group_state.activity
                } else if group_state.substyle_a[*member] {
                    dormant_a.sample(state, rng)
                } else {
                    dormant_b.sample(state, rng)
                }
            }
            Dist::Derived => 0.0,
        }
    }

    fn validate(&self, kind: ValueKind, groups: &BTreeMap<String, GroupSpec>) -> Result<(), String> {
        match self {
            Dist::Constant(v) => {
                if kind == ValueKind::Binary && *v != 0.0 && *v != 1.0 {
                    return Err(format!("binary feature cannot be constant {v}"));
                }
                if *v < 0.0 {
                    return Err(format!("negative constant {v}"));
                }
            }
            Dist::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("Bernoulli p out of range: {p}"));
                }
            }
            Dist::UniformInt { lo, hi } => {
                if kind == ValueKind::Binary && *hi > 1 {
                    return Err("binary feature needs a 0/1 distribution".into());
                }
                if lo > hi {
                    return Err(format!("empty range [{lo}, {hi}]"));
                }
            }
            Dist::Uniform { lo, hi } => {
                if kind == ValueKind::Binary {
                    return Err("binary feature needs a 0/1 distribution".into());
                }
                if *lo < 0.0 || lo >= hi {
                    return Err(format!("bad range [{lo}, {hi})"));
                }
            }
            Dist::GroupGated {
                group,
                member,
                active,
                dormant_a,
                dormant_b,
            } => {
                let spec = groups
                    .get(group)
                    .ok_or_else(|| format!("unknown group {group}"))?;
                if *member >= spec.members {
                    return Err(format!("member {member} out of range for group {group}"));
                }
                active.validate(kind, groups)?;
                dormant_a.validate(kind, groups)?;
                dormant_b.validate(kind, groups)?;
            }
            Dist::Derived => {}
        }
        Ok(())
    }
}

/// One archetype group: per package at most one member is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub members: usize,
    /// Probability that no member is active.
    pub none_prob: f64,
    /// Lower bound of the active member's establishment level; levels draw
    /// uniformly from `[semi_lo, 1]`. 1.0 disables partial establishment.
    #[serde(default = "full_activity")]
    pub semi_lo: f64,
    /// Which member each global archetype activates. When set, benign
    /// packages pick the member for their package-wide archetype, coupling
    /// the groups; malicious packages pick one of the two at random per
    /// group, so partially-established campaigns mix archetypes.
    #[serde(default)]
    pub pattern_members: Option<(usize, usize)>,
}

fn full_activity() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistPair {
    pub benign: Dist,
    pub malicious: Dist,
}

/// Per-feature distribution pairs plus the archetype groups that couple
/// related features within one package.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalProfile {
    pub features: BTreeMap<String, DistPair>,
    pub groups_benign: BTreeMap<String, GroupSpec>,
    pub groups_malicious: BTreeMap<String, GroupSpec>,
}

/// Synthetic corpus request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_malicious: usize,
    pub n_benign: usize,
    pub profile: SignalProfile,
    pub seed: u64,
    /// Fixed observation instant; extraction should use the same value.
    pub reference_time: DateTime<Utc>,
}

pub fn default_reference_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

impl SynthSpec {
    pub fn new(n_malicious: usize, n_benign: usize, seed: u64) -> Self {
        SynthSpec {
            n_malicious,
            n_benign,
            profile: SignalProfile::default_profile(),
            seed,
            reference_time: default_reference_time(),
        }
    }
}

impl SignalProfile {
    /// The default signal profile.
    ///
    /// Benign packages follow archetypes: within each stakeholder pair
    /// (author/maintainer, contributor/publisher) and interaction pair
    /// (star/fork, issues/subscribers) exactly one side is established and
    /// the other dormant. Malicious packages are dormant on (almost) every
    /// side, with a small chance per group of riding one established
    /// account, and skew toward absent authorship, short text and young
    /// ages. Dormant and malicious draws share the same per-feature ranges,
    /// so no single column separates the classes.
    pub fn default_profile() -> Self {
        let mut features = BTreeMap::new();
        let mut add = |name: &str, benign: Dist, malicious: Dist| {
            features.insert(name.to_string(), DistPair { benign, malicious });
        };
        let bern = |p: f64| Dist::Bernoulli { p };
        let ints = |lo: u64, hi: u64| Dist::UniformInt { lo, hi };
        let gated =
            |group: &str, member: usize, active: Dist, dormant_a: Dist, dormant_b: Dist| {
                Dist::GroupGated {
                    group: group.to_string(),
                    member,
                    active: Box::new(active),
                    dormant_a: Box::new(dormant_a),
                    dormant_b: Box::new(dormant_b),
                }
            };

        // Descriptive block: mild presence gaps, heavily overlapping value
        // ranges. Descriptive text is cheap to fake, so the synthetic signal
        // here is deliberately weak.
        add("name_exist", Dist::Constant(1.0), Dist::Constant(1.0));
        add("name_length", ints(5, 20), ints(5, 20));
        add("dist-tags_exist", bern(0.80), bern(0.80));
        add("dist-tags_length", Dist::Derived, Dist::Derived);
        add("versions_exist", Dist::Constant(1.0), Dist::Constant(1.0));
        add("versions_length", Dist::Derived, Dist::Derived);
        add("versions_num_count", ints(1, 30), ints(1, 30));
        add("maintainers_exist", bern(0.80), bern(0.80));
        add("description_exist", bern(0.78), bern(0.76));
        add("description_length", ints(10, 90), ints(8, 75));
        add("readme_exist", bern(0.76), bern(0.73));
        add("readme_length", ints(50, 2200), ints(30, 1200));
        add("scripts_exist", bern(0.72), bern(0.72));
        add("scripts_length", Dist::Derived, Dist::Derived);
        add("author_exist", bern(0.85), bern(0.80));
        add("author_name", Dist::Derived, Dist::Derived);
        add("author_email", bern(0.66), bern(0.66));
        add("License_exist", bern(0.77), bern(0.77));
        add("License_length", Dist::Derived, Dist::Derived);
        add("directories_exist", bern(0.26), bern(0.26));
        add("directories_length", Dist::Derived, Dist::Derived);
        add("keywords_exist", bern(0.72), bern(0.72));
        add("keywords_length", Dist::Derived, Dist::Derived);
        add("keywords_num_count", ints(1, 9), ints(1, 9));
        add("homepage_exist", bern(0.68), bern(0.65));
        add("homepage_length", Dist::Derived, Dist::Derived);
        add("github_exist", bern(0.72), bern(0.69));
        add("github_length", Dist::Derived, Dist::Derived);
        add("bugslink_exist", bern(0.47), bern(0.47));
        add("bugslink_length", Dist::Derived, Dist::Derived);
        add("issueslink_exist", bern(0.43), bern(0.43));
        add("issueslink_length", Dist::Derived, Dist::Derived);
        add("dependencies_exist", bern(0.75), bern(0.75));
        add("dependencies_length", Dist::Derived, Dist::Derived);
        add("devDependencies_exist", bern(0.62), bern(0.62));
        add("devDependencies_length", Dist::Derived, Dist::Derived);

        // Temporal block: wide overlap, deliberately weak on its own.
        add("package_age", ints(10, 1300), ints(5, 1200));
        add("package_modified_duration", Dist::Derived, Dist::Derived);
        add("package_published_duration", ints(0, 20), ints(0, 20));

        // Stakeholder establishment. An active member is established on
        // both axes (long service and many contributed packages), so its
        // contribution score lands in a tight high band. Dormant members are
        // half-established: long service with few packages, or a package
        // burst with little tenure. The axes therefore overlap between the
        // classes and only the combination separates them.
        let service_high = Dist::Uniform {
            lo: 980.0,
            hi: 1020.0,
        };
        let service_low = Dist::Uniform { lo: 0.0, hi: 100.0 };
        let cpn_high = ints(30, 34);
        let cpn_low = ints(1, 4);
        for (group, roles) in [
            ("roles_am", ["author", "maintainer"]),
            ("roles_cp", ["contributor", "publisher"]),
        ] {
            for (member, role) in roles.iter().enumerate() {
                let service = gated(
                    group,
                    member,
                    service_high.clone(),
                    service_high.clone(), // tenured but inactive
                    service_low.clone(),  // recent burst publisher
                );
                let cpn = gated(
                    group,
                    member,
                    cpn_high.clone(),
                    cpn_low.clone(),
                    cpn_high.clone(),
                );
                add(&format!("{role}_service_time"), service.clone(), service);
                add(&format!("{role}_CPN"), cpn.clone(), cpn);
                add(&format!("{role}_CCS"), Dist::Derived, Dist::Derived);
            }
        }

        // Interaction establishment: one community counter per pair is
        // high for benign packages; dormant counters share the malicious
        // range.
        let active_count = ints(980, 1020);
        let dormant_count = ints(0, 45);
        let interaction_groups: [(&str, &[&str]); 2] = [
            ("inter_sf", &["star", "fork_number"]),
            ("inter_ips", &["issues", "pull_request", "subscriber_count"]),
        ];
        for (group, counters) in interaction_groups {
            for (member, counter) in counters.iter().enumerate() {
                let dist = gated(
                    group,
                    member,
                    active_count.clone(),
                    dormant_count.clone(),
                    dormant_count.clone(),
                );
                add(counter, dist.clone(), dist);
            }
        }

        // (name, member count, members activated by archetype 0 / 1)
        let group_sizes = [
            ("roles_am", 2, (0, 1)),
            ("roles_cp", 2, (0, 1)),
            ("inter_sf", 2, (0, 1)),
            ("inter_ips", 3, (0, 2)),
        ];
        let groups_benign = group_sizes
            .iter()
            .map(|(g, members, pattern)| {
                (
                    g.to_string(),
                    GroupSpec {
                        members: *members,
                        none_prob: 0.0,
                        semi_lo: 1.0,
                        pattern_members: Some(*pattern),
                    },
                )
            })
            .collect();
        // Malicious packages are dormant across most groups. Mixing rates
        // differ per group so partially-established campaigns populate
        // several score levels below the benign establishment band.
        let groups_malicious = group_sizes
            .iter()
            .zip([0.35, 0.45, 0.55, 0.65])
            .map(|((g, members, pattern), none_prob)| {
                (
                    g.to_string(),
                    GroupSpec {
                        members: *members,
                        none_prob,
                        semi_lo: 1.0,
                        pattern_members: Some(*pattern),
                    },
                )
            })
            .collect();

        SignalProfile {
            features,
            groups_benign,
            groups_malicious,
        }
    }

    fn validate(&self, cat: &FeatureCatalog) -> Result<(), DatasetError> {
        for desc in cat.features() {
            let pair = self.features.get(&desc.name).ok_or_else(|| {
                DatasetError::BadProfile(format!("no distribution pair for {}", desc.name))
            })?;
            for (side, dist, groups) in [
                ("benign", &pair.benign, &self.groups_benign),
                ("malicious", &pair.malicious, &self.groups_malicious),
            ] {
                dist.validate(desc.value_kind, groups).map_err(|e| {
                    DatasetError::BadProfile(format!("{} ({side}): {e}", desc.name))
                })?;
            }
        }
        Ok(())
    }
}

/// Generate a labeled corpus of full metadata records whose extracted
/// features follow the profile. Deterministic per seed.
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<LabeledPmi>, DatasetError> {
    let cat = catalog();
    spec.profile.validate(&cat)?;
    let mut corpus = Vec::with_capacity(spec.n_malicious + spec.n_benign);
    for i in 0..spec.n_benign {
        corpus.push(generate_one(spec, &cat, i as u64, 0));
    }
    for i in 0..spec.n_malicious {
        corpus.push(generate_one(spec, &cat, i as u64, 1));
    }
    // Pin the corpus-wide newest modified_time to the reference instant so
    // reference-time-from-corpus defaults reproduce spec.reference_time.
    if let Some(first) = corpus.first_mut() {
        first.metadata.modified_time = Some(spec.reference_time);
    }
    let mut rng = rng_for(spec.seed, "synth-order", 0);
    corpus.shuffle(&mut rng);
    Ok(corpus)
}

fn generate_one(spec: &SynthSpec, cat: &FeatureCatalog, index: u64, label: u8) -> LabeledPmi {
    let mut rng = rng_for(spec.seed, if label == 1 { "synth-mal" } else { "synth-ben" }, index);
    let profile = &spec.profile;
    let groups = if label == 1 {
        &profile.groups_malicious
    } else {
        &profile.groups_benign
    };

    // Draw the archetype state: which member of each group is active, and
    // each member's dormant sub-style. Benign packages follow one global
    // archetype across pattern-coupled groups; malicious packages draw per
    // group.
    let global_pattern = rng.random_bool(0.5);
    let mut state: BTreeMap<String, GroupState> = BTreeMap::new();
    for (name, g) in groups {
        let active = if rng.random_bool(g.none_prob) {
            None
        } else {
            match g.pattern_members {
                Some((a, b)) => {
                    let follow_global = label == 0;
                    let chosen = if follow_global {
                        global_pattern
                    } else {
                        rng.random_bool(0.5)
                    };
                    Some(if chosen { b } else { a })
                }
                None => Some(rng.random_range(0..g.members)),
            }
        };
        let substyle_a = (0..g.members).map(|_| rng.random_bool(0.5)).collect();
        let activity = if g.semi_lo < 1.0 {
            rng.random_range(g.semi_lo..=1.0)
        } else {
            1.0
        };
        state.insert(
            name.clone(),
            GroupState {
                active,
                substyle_a,
                activity,
            },
        );
    }

    let side = |name: &str| -> &Dist {
        let pair = &profile.features[name];
        if label == 1 {
            &pair.malicious
        } else {
            &pair.benign
        }
    };
    let draw = |name: &str, rng: &mut ChaCha8Rng| side(name).sample(&state, rng);

    let class_tag = if label == 1 { "m" } else { "b" };
    let mut pm = PackageMetadata::named("x");
    pm.package_name = synth_name(
        format!("{class_tag}{index}").as_str(),
        draw("name_length", &mut rng) as usize,
    );

    let reference = spec.reference_time;
    let age_days = draw("package_age", &mut rng) as i64;
    pm.created_time = reference - Duration::days(age_days);
    let modified_frac = rng.random_range(0.2..0.9);
    pm.modified_time = Some(pm.created_time + Duration::days((age_days as f64 * modified_frac) as i64));
    let publish_lag = (draw("package_published_duration", &mut rng) as i64).min(age_days);

    let n_versions = (draw("versions_num_count", &mut rng) as usize).max(1);
    let first_publish = pm.created_time + Duration::days(publish_lag);
    let span_days = (reference - first_publish).num_days().max(0);
    for v in 0..n_versions {
        let ts = if n_versions == 1 {
            first_publish
        } else {
            first_publish + Duration::days(span_days * v as i64 / (n_versions as i64 - 1).max(1))
        };
        pm.published_times.insert(format!("{}.0.0", v + 1), ts);
    }
    pm.version = format!("{n_versions}.0.0");

    if draw("dist-tags_exist", &mut rng) == 1.0 {
        let mut tags = BTreeMap::new();
        tags.insert("latest".to_string(), pm.version.clone());
        pm.distribution_tags = Some(tags);
    }
    if draw("description_exist", &mut rng) == 1.0 {
        let len = draw("description_length", &mut rng) as usize;
        pm.description = Some(synth_text("package utility helper tool ", len));
    }
    if draw("readme_exist", &mut rng) == 1.0 {
        let len = draw("readme_length", &mut rng) as usize;
        pm.readme = Some(synth_text("readme install usage example api notes ", len));
    }
    if draw("scripts_exist", &mut rng) == 1.0 {
        let mut scripts = BTreeMap::new();
        scripts.insert("test".to_string(), "node test/run.js".to_string());
        if rng.random_bool(0.5) {
            scripts.insert("build".to_string(), "node build.js".to_string());
        }
        pm.scripts = Some(scripts);
    }
    if draw("License_exist", &mut rng) == 1.0 {
        pm.licenses = Some(
            ["MIT", "Apache-2.0", "ISC", "BSD-3-Clause"][rng.random_range(0..4)].to_string(),
        );
    }
    if draw("directories_exist", &mut rng) == 1.0 {
        let mut dirs = BTreeMap::new();
        dirs.insert("lib".to_string(), "./lib".to_string());
        pm.directories = Some(dirs);
    }
    if draw("keywords_exist", &mut rng) == 1.0 {
        let k = (draw("keywords_num_count", &mut rng) as usize).max(1);
        pm.keywords = (0..k).map(|i| format!("kw{i}")).collect();
    }
    let host = format!("https://example.com/{}", pm.package_name);
    if draw("homepage_exist", &mut rng) == 1.0 {
        pm.homepage_link = Some(host.clone());
    }
    if draw("github_exist", &mut rng) == 1.0 {
        pm.github_link = Some(format!("https://github.com/{0}/{0}.git", pm.package_name));
    }
    if draw("bugslink_exist", &mut rng) == 1.0 {
        pm.bugs_link = Some(format!("{host}/bugs"));
    }
    if draw("issueslink_exist", &mut rng) == 1.0 {
        pm.issues_link = Some(format!("{host}/issues"));
    }
    if draw("dependencies_exist", &mut rng) == 1.0 {
        for d in 0..rng.random_range(1..=6usize) {
            pm.dependencies
                .insert(format!("dep-{d}"), format!("^{}.0.0", d + 1));
        }
    }
    if draw("devDependencies_exist", &mut rng) == 1.0 {
        for d in 0..rng.random_range(1..=5usize) {
            pm.development_dependencies
                .insert(format!("devdep-{d}"), format!("^{}.1.0", d + 1));
        }
    }

    // Stakeholders: the role is listed whenever its exist-feature fires or
    // its archetype is active; service time and CPN go to the history map.
    let author_present = draw("author_exist", &mut rng) == 1.0;
    let author_email = draw("author_email", &mut rng) == 1.0;
    let maintainer_present = draw("maintainers_exist", &mut rng) == 1.0;
    for role in StakeholderRole::ALL {
        let service = draw(&format!("{}_service_time", role.as_str()), &mut rng);
        let cpn = draw(&format!("{}_CPN", role.as_str()), &mut rng) as u64;
        let listed = match role {
            StakeholderRole::Author => author_present || service > 100.0,
            StakeholderRole::Maintainer => maintainer_present || service > 100.0,
            // No exist-feature governs these roles; list them when the
            // archetype gave them any standing.
            _ => service > 0.0 || cpn > 0,
        };
        if !listed {
            continue;
        }
        let who = format!("{}-{}-{}", role.as_str(), class_tag, index);
        let person = if role == StakeholderRole::Author && !author_email {
            Person::named(&who)
        } else {
            Person::with_email(&who, &format!("{who}@example.com"))
        };
        pm.stakeholder_history.insert(
            person.identity(),
            StakeholderRecord {
                role,
                first_seen: reference - Duration::days(service as i64),
                contributed_package_count: cpn.max(1),
            },
        );
        match role {
            StakeholderRole::Author => pm.authors.push(person),
            StakeholderRole::Maintainer => pm.maintainers.push(person),
            StakeholderRole::Contributor => pm.contributors.push(person),
            StakeholderRole::Publisher => pm.publishers.push(person),
        }
    }

    pm.interactions = InteractionCounts {
        pull_request: draw("pull_request", &mut rng) as u64,
        issues: draw("issues", &mut rng) as u64,
        fork_number: draw("fork_number", &mut rng) as u64,
        star: draw("star", &mut rng) as u64,
        subscriber_count: draw("subscriber_count", &mut rng) as u64,
    };

    let _ = cat;
    LabeledPmi {
        metadata: pm,
        label,
    }
}

fn synth_name(tag: &str, target_len: usize) -> String {
    let mut name = format!("pkg-{tag}");
    while name.chars().count() < target_len {
        name.push('x');
    }
    name
}

fn synth_text(base: &str, target_len: usize) -> String {
    let mut text = String::with_capacity(target_len);
    while text.chars().count() < target_len {
        text.push_str(base);
    }
    text.chars().take(target_len.max(1)).collect()
}
