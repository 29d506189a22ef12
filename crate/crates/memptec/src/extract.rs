//! Feature extraction: maps a [`PackageMetadata`] record to a numeric vector
//! under a given catalog and reference time.
//!
//! Exist features are 1/0 presence indicators, length features count Unicode
//! scalar values of the canonically serialized field, durations are whole
//! calendar days (UTC dates, truncated toward zero), and per-role stakeholder
//! features come from the record's stakeholder history. Extraction is a pure
//! function of `(record, catalog, reference_time)`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{FeatureCatalog, FeatureDescriptor};
use crate::pmi::{LabeledPmi, PackageMetadata, StakeholderRole};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("package {package}: reference time {reference} precedes creation {created}")]
    ClockSkew {
        package: String,
        created: DateTime<Utc>,
        reference: DateTime<Utc>,
    },
    #[error("log base must exceed 1, got {0}")]
    BadBase(f64),
    #[error("package #{index} ({name}): {source}")]
    PackageFailed {
        index: usize,
        name: String,
        #[source]
        source: Box<ExtractError>,
    },
    #[error("matrix csv: {0}")]
    BadMatrixCsv(String),
}

/// One extracted row, aligned with the catalog's feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<S: Scalar> {
    pub package_name: String,
    pub values: Vec<S>,
}

/// Extracted rows plus labels, tied to the catalog that defined the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<S: Scalar> {
    rows: Vec<FeatureVector<S>>,
    labels: Vec<u8>,
    catalog: FeatureCatalog,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn new(rows: Vec<FeatureVector<S>>, labels: Vec<u8>, catalog: FeatureCatalog) -> Self {
        assert_eq!(rows.len(), labels.len(), "rows and labels must align");
        for row in &rows {
            assert_eq!(row.values.len(), catalog.len(), "row width mismatch");
        }
        FeatureMatrix {
            rows,
            labels,
            catalog,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.catalog.len()
    }

    pub fn rows(&self) -> &[FeatureVector<S>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn catalog(&self) -> &FeatureCatalog {
        &self.catalog
    }

    pub fn value(&self, row: usize, col: usize) -> S {
        self.rows[row].values[col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, v: S) {
        self.rows[row].values[col] = v;
    }

    pub fn column(&self, col: usize) -> Vec<S> {
        self.rows.iter().map(|r| r.values[col]).collect()
    }

    /// Row indices carrying the malicious label.
    pub fn malicious_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn benign_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Select rows by index into a new matrix (catalog shared).
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix<S> {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            catalog: self.catalog.clone(),
        }
    }

    /// Matrix CSV: catalog names plus a trailing `label` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<&str> = self.catalog.names().collect();
        writeln!(w, "{},label", header.join(","))?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut line = String::new();
            for v in &row.values {
                line.push_str(&format!("{v}"));
                line.push(',');
            }
            writeln!(w, "{line}{label}")?;
        }
        Ok(())
    }

    /// Read a matrix CSV produced by [`FeatureMatrix::write_csv`]. Feature
    /// names must exist in `universe`; leading `#` comment lines are skipped.
    pub fn read_csv<R: BufRead>(
        reader: R,
        universe: &FeatureCatalog,
    ) -> Result<FeatureMatrix<S>, ExtractError> {
        let mut lines = reader
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExtractError::BadMatrixCsv(e.to_string()))?
            .into_iter()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| ExtractError::BadMatrixCsv("empty file".into()))?;
        let mut names: Vec<&str> = header.split(',').collect();
        if names.pop() != Some("label") {
            return Err(ExtractError::BadMatrixCsv(
                "last column must be `label`".into(),
            ));
        }
        let mut features = Vec::with_capacity(names.len());
        for name in &names {
            let desc = universe
                .descriptor(name)
                .ok_or_else(|| ExtractError::BadMatrixCsv(format!("unknown feature {name}")))?;
            features.push(desc.name.clone());
        }
        let catalog = crate::catalog::subset(universe, &crate::catalog::Selector::Named(features))
            .map_err(|e| ExtractError::BadMatrixCsv(e.to_string()))?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != names.len() + 1 {
                return Err(ExtractError::BadMatrixCsv(format!(
                    "row {i} has {} cells, expected {}",
                    cells.len(),
                    names.len() + 1
                )));
            }
            let mut values = Vec::with_capacity(names.len());
            for cell in &cells[..names.len()] {
                let v: f64 = cell
                    .parse()
                    .map_err(|e| ExtractError::BadMatrixCsv(format!("row {i}: {e}")))?;
                values.push(S::c(v));
            }
            let label: u8 = cells[names.len()]
                .parse()
                .map_err(|e| ExtractError::BadMatrixCsv(format!("row {i} label: {e}")))?;
            rows.push(FeatureVector {
                package_name: format!("row-{i}"),
                values,
            });
            labels.push(label);
        }
        Ok(FeatureMatrix::new(rows, labels, catalog))
    }
}

// ─── Core formulas ───────────────────────────────────────────────────────────

/// Whole calendar days from `a` to `b` (UTC dates), negative when `b` is
/// the earlier date.
pub fn days_between(a: DateTime<Utc>, b: DateTime<Utc>) -> i64 {
    (b.date_naive() - a.date_naive()).num_days()
}

fn days_clamped(a: DateTime<Utc>, b: DateTime<Utc>) -> u64 {
    days_between(a, b).max(0) as u64
}

/// Community contribution score: `log_base(1 + service_days) * log_base(1 + cpn)`.
///
/// The +1 shift keeps the score defined (and zero) for brand-new
/// stakeholders, and the product stays non-decreasing in both arguments.
pub fn ccs<S: Scalar>(service_time_days: S, cpn: S, base: S) -> Result<S, ExtractError> {
    if base <= S::one() {
        return Err(ExtractError::BadBase(base.as_f64()));
    }
    let log_base = |v: S| (S::one() + v).ln() / base.ln();
    Ok(log_base(service_time_days) * log_base(cpn))
}

/// Log base used for CCS features during extraction.
pub const CCS_DEFAULT_BASE: f64 = 2.0;

// ─── Extraction ─────────────────────────────────────────────────────────────

fn char_len(s: &str) -> u64 {
    s.chars().count() as u64
}

fn opt_len(s: &Option<String>) -> u64 {
    s.as_deref().map(char_len).unwrap_or(0)
}

fn opt_exists(s: &Option<String>) -> bool {
    s.as_deref().is_some_and(|v| !v.trim().is_empty())
}

/// Canonical map serialization: `key:value` entries joined by commas, in
/// key order.
fn map_canonical(m: &BTreeMap<String, String>) -> String {
    m.iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_map_canonical(m: &Option<BTreeMap<String, String>>) -> String {
    m.as_ref().map(map_canonical).unwrap_or_default()
}

fn list_canonical(items: &[String]) -> String {
    items.join(",")
}

struct RoleFeatures {
    cpn: u64,
    service_days: u64,
}

fn role_features(
    pmi: &PackageMetadata,
    role: StakeholderRole,
    reference: DateTime<Utc>,
) -> RoleFeatures {
    // Earliest-listed person of the role; packages lacking the role or its
    // history entry score zero.
    let Some(person) = pmi.stakeholders(role).first() else {
        return RoleFeatures {
            cpn: 0,
            service_days: 0,
        };
    };
    let Some(record) = pmi.stakeholder_history.get(&person.identity()) else {
        return RoleFeatures {
            cpn: 0,
            service_days: 0,
        };
    };
    RoleFeatures {
        cpn: record.contributed_package_count,
        service_days: days_clamped(record.first_seen, reference),
    }
}

fn special_char_count(name: &str) -> u64 {
    name.chars()
        .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
        .count() as u64
}

fn feature_value<S: Scalar>(
    desc: &FeatureDescriptor,
    pmi: &PackageMetadata,
    reference: DateTime<Utc>,
) -> Result<S, ExtractError> {
    let b = |v: bool| if v { S::one() } else { S::zero() };
    let n = S::from_count;

    let versions: Vec<String> = pmi.published_times.keys().cloned().collect();
    let value = match desc.name.as_str() {
        "name_exist" => b(!pmi.package_name.trim().is_empty()),
        "name_length" => n(char_len(&pmi.package_name)),
        "name_special_char" => n(special_char_count(&pmi.package_name)),
        "dist-tags_exist" => b(pmi
            .distribution_tags
            .as_ref()
            .is_some_and(|m| !m.is_empty())),
        "dist-tags_length" => n(char_len(&opt_map_canonical(&pmi.distribution_tags))),
        "versions_exist" => b(!versions.is_empty() || !pmi.version.is_empty()),
        "versions_length" => n(char_len(&list_canonical(&versions))),
        "versions_num_count" => n(versions.len() as u64),
        "maintainers_exist" => b(!pmi.maintainers.is_empty()),
        "description_exist" => b(opt_exists(&pmi.description)),
        "description_length" => n(opt_len(&pmi.description)),
        "readme_exist" => b(opt_exists(&pmi.readme)),
        "readme_length" => n(opt_len(&pmi.readme)),
        "scripts_exist" => b(pmi.scripts.as_ref().is_some_and(|m| !m.is_empty())),
        "scripts_length" => n(char_len(&opt_map_canonical(&pmi.scripts))),
        "author_exist" => b(!pmi.authors.is_empty()),
        "author_name" => b(pmi
            .authors
            .first()
            .is_some_and(|p| opt_exists(&p.name))),
        "author_email" => b(pmi
            .authors
            .first()
            .is_some_and(|p| opt_exists(&p.email))),
        "License_exist" => b(opt_exists(&pmi.licenses)),
        "License_length" => n(opt_len(&pmi.licenses)),
        "directories_exist" => b(pmi.directories.as_ref().is_some_and(|m| !m.is_empty())),
        "directories_length" => n(char_len(&opt_map_canonical(&pmi.directories))),
        "keywords_exist" => b(!pmi.keywords.is_empty()),
        "keywords_length" => n(char_len(&list_canonical(&pmi.keywords))),
        "keywords_num_count" => n(pmi.keywords.len() as u64),
        "homepage_exist" => b(opt_exists(&pmi.homepage_link)),
        "homepage_length" => n(opt_len(&pmi.homepage_link)),
        "github_exist" => b(opt_exists(&pmi.github_link)),
        "github_length" => n(opt_len(&pmi.github_link)),
        "bugslink_exist" => b(opt_exists(&pmi.bugs_link)),
        "bugslink_length" => n(opt_len(&pmi.bugs_link)),
        "issueslink_exist" => b(opt_exists(&pmi.issues_link)),
        "issueslink_length" => n(opt_len(&pmi.issues_link)),
        "dependencies_exist" => b(!pmi.dependencies.is_empty()),
        "dependencies_length" => n(char_len(&map_canonical(&pmi.dependencies))),
        "devDependencies_exist" => b(!pmi.development_dependencies.is_empty()),
        "devDependencies_length" => n(char_len(&map_canonical(&pmi.development_dependencies))),
        "package_age" => n(days_clamped(pmi.created_time, reference)),
        "package_modified_duration" => n(pmi
            .modified_time
            .map(|m| days_clamped(pmi.created_time, m))
            .unwrap_or(0)),
        "package_published_duration" => n(pmi
            .first_published()
            .map(|p| days_clamped(pmi.created_time, p))
            .unwrap_or(0)),
        "pull_request" => n(pmi.interactions.pull_request),
        "issues" => n(pmi.interactions.issues),
        "fork_number" => n(pmi.interactions.fork_number),
        "star" => n(pmi.interactions.star),
        "subscriber_count" => n(pmi.interactions.subscriber_count),
        role_feature => {
            let (role_name, kind) = role_feature
                .split_once('_')
                .unwrap_or((role_feature, ""));
            let role = StakeholderRole::ALL
                .into_iter()
                .find(|r| r.as_str() == role_name)
                .unwrap_or_else(|| panic!("unknown feature {role_feature}"));
            let rf = role_features(pmi, role, reference);
            match kind {
                "CPN" => n(rf.cpn),
                "service_time" => n(rf.service_days),
                "CCS" => ccs(n(rf.service_days), n(rf.cpn), S::c(CCS_DEFAULT_BASE))?,
                other => panic!("unknown stakeholder feature kind {other}"),
            }
        }
    };
    Ok(value)
}

/// Extract one feature vector. Fails with `ClockSkew` when the reference
/// time precedes the record's creation time.
pub fn extract<S: Scalar>(
    pmi: &PackageMetadata,
    cat: &FeatureCatalog,
    reference_time: DateTime<Utc>,
) -> Result<FeatureVector<S>, ExtractError> {
    if reference_time < pmi.created_time {
        return Err(ExtractError::ClockSkew {
            package: pmi.package_name.clone(),
            created: pmi.created_time,
            reference: reference_time,
        });
    }
    let mut values = Vec::with_capacity(cat.len());
    for desc in cat.features() {
        values.push(feature_value(desc, pmi, reference_time)?);
    }
    Ok(FeatureVector {
        package_name: pmi.package_name.clone(),
        values,
    })
}

/// Extract every record of a labeled corpus into a matrix. Rows are
/// computed in parallel; output is independent of the parallelism degree.
pub fn extract_matrix<S: Scalar>(
    corpus: &[LabeledPmi],
    cat: &FeatureCatalog,
    reference_time: DateTime<Utc>,
) -> Result<FeatureMatrix<S>, ExtractError> {
    let results: Vec<Result<FeatureVector<S>, ExtractError>> = corpus
        .par_iter()
        .map(|lp| extract(&lp.metadata, cat, reference_time))
        .collect();
    let mut rows = Vec::with_capacity(corpus.len());
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(row) => rows.push(row),
            Err(source) => {
                return Err(ExtractError::PackageFailed {
                    index,
                    name: corpus[index].metadata.package_name.clone(),
                    source: Box::new(source),
                })
            }
        }
    }
    let labels = corpus.iter().map(|lp| lp.label).collect();
    Ok(FeatureMatrix::new(rows, labels, cat.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{catalog, catalog_extended, FeatureClass};
    use crate::pmi::{parse_pmi, parse_timestamp, Person, StakeholderRecord};
    use proptest::prelude::*;

    fn axios() -> PackageMetadata {
        let raw = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/axios.json"
        ))
        .unwrap();
        parse_pmi(&raw).unwrap()
    }

    fn reference() -> DateTime<Utc> {
        parse_timestamp("2023-05-20T13:42:00.650Z").unwrap()
    }

    fn value_of(row: &FeatureVector<f64>, cat: &FeatureCatalog, name: &str) -> f64 {
        row.values[cat.index_of(name).unwrap()]
    }

    #[test]
    fn axios_golden_values() {
        let cat = catalog();
        let row: FeatureVector<f64> = extract(&axios(), &cat, reference()).unwrap();
        assert_eq!(value_of(&row, &cat, "keywords_num_count"), 5.0);
        assert_eq!(value_of(&row, &cat, "fork_number"), 10_900.0);
        assert_eq!(value_of(&row, &cat, "star"), 10_300.0);
        assert_eq!(value_of(&row, &cat, "subscriber_count"), 1_200.0);
        assert_eq!(value_of(&row, &cat, "issues"), 488.0);
        assert_eq!(value_of(&row, &cat, "description_length"), 53.0);
        assert_eq!(value_of(&row, &cat, "package_age"), 3_186.0);
    }

    #[test]
    fn minimal_record_is_all_zero_except_name() {
        let cat = catalog();
        let pm = PackageMetadata::named("solo");
        let row: FeatureVector<f64> =
            extract(&pm, &cat, parse_timestamp("1970-01-02").unwrap()).unwrap();
        for (desc, v) in cat.features().iter().zip(&row.values) {
            match desc.name.as_str() {
                "name_exist" => assert_eq!(*v, 1.0),
                "name_length" => assert_eq!(*v, 4.0),
                "package_age" => assert_eq!(*v, 1.0),
                _ => assert_eq!(*v, 0.0, "{} should be 0", desc.name),
            }
        }
    }

    #[test]
    fn ccs_known_values() {
        assert_eq!(ccs(0.0f64, 5.0, 2.0).unwrap(), 0.0);
        assert_eq!(ccs(3.0f64, 3.0, 2.0).unwrap(), 4.0);
        let v = ccs(365.0f64, 7.0, 2.0).unwrap();
        assert!((v - 25.548).abs() <= 1e-3, "got {v}");
    }

    #[test]
    fn ccs_rejects_bad_base() {
        assert!(matches!(
            ccs(1.0f64, 1.0, 1.0),
            Err(ExtractError::BadBase(_))
        ));
        assert!(matches!(
            ccs(1.0f64, 1.0, 0.5),
            Err(ExtractError::BadBase(_))
        ));
    }

    #[test]
    fn ccs_works_in_f32() {
        let v = ccs(3.0f32, 3.0, 2.0).unwrap();
        assert!((v - 4.0).abs() < 1e-5);
    }

    #[test]
    fn clock_skew_is_an_error() {
        let mut pm = PackageMetadata::named("late");
        pm.created_time = parse_timestamp("2024-01-01").unwrap();
        let err = extract::<f64>(&pm, &catalog(), parse_timestamp("2023-01-01").unwrap());
        assert!(matches!(err, Err(ExtractError::ClockSkew { .. })));
    }

    #[test]
    fn matrix_rows_follow_corpus_order_and_errors_name_the_package() {
        let cat = catalog();
        let good = LabeledPmi {
            metadata: axios(),
            label: 0,
        };
        let mut bad_pm = PackageMetadata::named("skewed");
        bad_pm.created_time = parse_timestamp("2099-01-01").unwrap();
        let bad = LabeledPmi {
            metadata: bad_pm,
            label: 1,
        };

        let m: FeatureMatrix<f64> =
            extract_matrix(&[good.clone(), good.clone()], &cat, reference()).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_features(), 56);

        let err = extract_matrix::<f64>(&[good, bad], &cat, reference()).unwrap_err();
        match err {
            ExtractError::PackageFailed { index, name, .. } => {
                assert_eq!(index, 1);
                assert_eq!(name, "skewed");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let cat = catalog();
        let corpus = vec![
            LabeledPmi {
                metadata: axios(),
                label: 0,
            };
            10
        ];
        let a: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference()).unwrap();
        let b: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stakeholder_features_use_history() {
        let cat = catalog();
        let mut pm = PackageMetadata::named("hist");
        pm.created_time = parse_timestamp("2020-01-01").unwrap();
        let ada = Person::with_email("Ada", "ada@example.com");
        pm.authors.push(ada.clone());
        pm.stakeholder_history.insert(
            ada.identity(),
            StakeholderRecord {
                role: StakeholderRole::Author,
                first_seen: parse_timestamp("2020-01-01").unwrap(),
                contributed_package_count: 3,
            },
        );
        let reference = parse_timestamp("2020-01-04").unwrap();
        let row: FeatureVector<f64> = extract(&pm, &cat, reference).unwrap();
        assert_eq!(value_of(&row, &cat, "author_CPN"), 3.0);
        assert_eq!(value_of(&row, &cat, "author_service_time"), 3.0);
        assert_eq!(value_of(&row, &cat, "author_CCS"), 4.0); // log2(4)·log2(4)
        assert_eq!(value_of(&row, &cat, "maintainer_CPN"), 0.0);
    }

    #[test]
    fn special_char_feature_counts_non_alphanumerics() {
        let ext = catalog_extended();
        let pm = PackageMetadata::named("my-pkg_2.0");
        let row: FeatureVector<f64> =
            extract(&pm, &ext, parse_timestamp("1970-01-01").unwrap()).unwrap();
        assert_eq!(value_of(&row, &ext, "name_special_char"), 3.0);
    }

    #[test]
    fn etm_features_ignore_interactions_and_timestamps() {
        let cat = catalog();
        let reference = reference();
        let base = axios();
        let base_row: FeatureVector<f64> = extract(&base, &cat, reference).unwrap();

        let mut shifted = base.clone();
        shifted.interactions.star += 500;
        shifted.interactions.pull_request += 7;
        shifted.created_time = parse_timestamp("2016-01-01").unwrap();
        shifted.modified_time = Some(parse_timestamp("2022-02-02").unwrap());
        for ts in shifted.published_times.values_mut() {
            *ts = parse_timestamp("2021-01-01").unwrap();
        }
        let shifted_row: FeatureVector<f64> = extract(&shifted, &cat, reference).unwrap();

        for (i, desc) in cat.features().iter().enumerate() {
            if desc.klass == FeatureClass::Etm {
                assert_eq!(
                    base_row.values[i], shifted_row.values[i],
                    "ETM feature {} moved",
                    desc.name
                );
            }
        }
    }

    #[test]
    fn dtm_features_ignore_descriptive_text() {
        let cat = catalog();
        let reference = reference();
        let base = axios();
        let base_row: FeatureVector<f64> = extract(&base, &cat, reference).unwrap();

        let mut reworded = base.clone();
        reworded.description = Some("totally different words".into());
        reworded.readme = None;
        reworded.keywords = vec!["one".into()];
        reworded.homepage_link = None;
        let reworded_row: FeatureVector<f64> = extract(&reworded, &cat, reference).unwrap();

        for (i, desc) in cat.features().iter().enumerate() {
            if desc.klass == FeatureClass::Dtm {
                assert_eq!(
                    base_row.values[i], reworded_row.values[i],
                    "DTM feature {} moved",
                    desc.name
                );
            }
        }
    }

    #[test]
    fn matrix_csv_roundtrip() {
        let cat = catalog();
        let corpus = vec![
            LabeledPmi {
                metadata: axios(),
                label: 1,
            },
            LabeledPmi {
                metadata: axios(),
                label: 0,
            },
        ];
        let m: FeatureMatrix<f64> = extract_matrix(&corpus, &cat, reference()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("name_exist,"));
        assert!(text.lines().next().unwrap().ends_with(",label"));

        let back: FeatureMatrix<f64> =
            FeatureMatrix::read_csv(std::io::BufReader::new(&buf[..]), &cat).unwrap();
        assert_eq!(back.n_rows(), 2);
        assert_eq!(back.labels(), m.labels());
        for r in 0..2 {
            assert_eq!(back.rows()[r].values, m.rows()[r].values);
        }
    }

    proptest! {
        /// Forward updates never decrease monotonic-flagged features.
        #[test]
        fn monotone_updates_never_decrease_flagged_features(
            advance_days in 0i64..2000,
            extra_cpn in 0u64..50,
            new_version_gap in 1i64..500,
        ) {
            let cat = catalog();
            let mut pm = PackageMetadata::named("mono");
            pm.created_time = parse_timestamp("2019-01-01").unwrap();
            pm.modified_time = Some(parse_timestamp("2019-06-01").unwrap());
            pm.published_times.insert(
                "1.0.0".into(),
                parse_timestamp("2019-02-01").unwrap(),
            );
            let ada = Person::named("Ada");
            pm.authors.push(ada.clone());
            pm.stakeholder_history.insert(
                ada.identity(),
                StakeholderRecord {
                    role: StakeholderRole::Author,
                    first_seen: parse_timestamp("2018-01-01").unwrap(),
                    contributed_package_count: 2,
                },
            );

            let t0 = parse_timestamp("2020-01-01").unwrap();
            let before: FeatureVector<f64> = extract(&pm, &cat, t0).unwrap();

            let mut updated = pm.clone();
            updated.published_times.insert(
                "2.0.0".into(),
                t0 + chrono::Duration::days(new_version_gap),
            );
            updated
                .stakeholder_history
                .get_mut(&ada.identity())
                .unwrap()
                .contributed_package_count += extra_cpn;
            let t1 = t0 + chrono::Duration::days(advance_days + new_version_gap);
            let after: FeatureVector<f64> = extract(&updated, &cat, t1).unwrap();

            for (i, desc) in cat.features().iter().enumerate() {
                if desc.monotonic {
                    prop_assert!(
                        after.values[i] >= before.values[i],
                        "{} decreased: {} -> {}",
                        desc.name, before.values[i], after.values[i]
                    );
                }
            }
        }

        /// CCS is non-decreasing in both arguments and symmetric in its
        /// arguments for a fixed base.
        #[test]
        fn ccs_monotone_and_symmetric(
            a in 0.0f64..5000.0,
            b in 0.0f64..5000.0,
            bump in 0.0f64..100.0,
        ) {
            let v = ccs(a, b, 2.0).unwrap();
            prop_assert!(ccs(a + bump, b, 2.0).unwrap() >= v);
            prop_assert!(ccs(a, b + bump, 2.0).unwrap() >= v);
            let swapped = ccs(b, a, 2.0).unwrap();
            prop_assert!((v - swapped).abs() < 1e-9);
        }
    }
}
