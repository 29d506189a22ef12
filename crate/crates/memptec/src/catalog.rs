//! The fixed, ordered feature catalog.
//!
//! 36 easy-to-manipulate (ETM) features derived from descriptive metadata
//! plus 20 difficult-to-manipulate (DTM) features derived from temporal and
//! interaction signals. A feature is DTM exactly when it is monotonic (its
//! value can only move one way under legitimate updates) or under restricted
//! control (stakeholders cannot set it directly); ETM otherwise.
//!
//! The published feature table this catalog follows enumerates 20 DTM
//! features even though its companion summary claims 21; the catalog ships
//! the 20 enumerated names. Catalog order defines feature-matrix column
//! order and is stable across runs.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureClass {
    Etm,
    Dtm,
}

impl FeatureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureClass::Etm => "ETM",
            FeatureClass::Dtm => "DTM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Binary,
    Count,
    Length,
    DurationDays,
    Score,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueKind::Binary => "binary",
            ValueKind::Count => "count",
            ValueKind::Length => "length",
            ValueKind::DurationDays => "duration_days",
            ValueKind::Score => "score",
        }
    }
}

/// One feature: its name, class, manipulation flags, the metadata key it is
/// derived from, and the kind of value it takes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub klass: FeatureClass,
    pub monotonic: bool,
    pub restricted_control: bool,
    pub source_information: String,
    pub value_kind: ValueKind,
}

/// Ordered list of feature descriptors; order defines matrix column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    features: Vec<FeatureDescriptor>,
}

/// Which features to keep from a parent catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    All,
    EtmOnly,
    DtmOnly,
    /// The 11-feature baseline approximating prior metadata detectors.
    ExistingTec,
    Named(Vec<String>),
}

/// Default members of the `existing_tec` baseline, overridable via
/// [`Selector::Named`].
pub const EXISTING_TEC_DEFAULT: [&str; 11] = [
    "name_length",
    "description_exist",
    "readme_length",
    "scripts_exist",
    "author_exist",
    "maintainers_exist",
    "dependencies_exist",
    "devDependencies_exist",
    "versions_length",
    "homepage_exist",
    "github_exist",
];

fn etm(name: &str, source: &str, kind: ValueKind) -> FeatureDescriptor {
    FeatureDescriptor {
        name: name.to_string(),
        klass: FeatureClass::Etm,
        monotonic: false,
        restricted_control: false,
        source_information: source.to_string(),
        value_kind: kind,
    }
}

fn dtm_monotonic(name: &str, source: &str, kind: ValueKind) -> FeatureDescriptor {
    FeatureDescriptor {
        name: name.to_string(),
        klass: FeatureClass::Dtm,
        monotonic: true,
        restricted_control: false,
        source_information: source.to_string(),
        value_kind: kind,
    }
}

fn dtm_restricted(name: &str) -> FeatureDescriptor {
    FeatureDescriptor {
        name: name.to_string(),
        klass: FeatureClass::Dtm,
        monotonic: false,
        restricted_control: true,
        source_information: "interactions".to_string(),
        value_kind: ValueKind::Count,
    }
}

/// The canonical 56-feature catalog: 36 ETM then 20 DTM, in table order.
pub fn catalog() -> FeatureCatalog {
    use ValueKind::*;
    let mut features = vec![
        etm("name_exist", "package_name", Binary),
        etm("name_length", "package_name", Length),
        etm("dist-tags_exist", "distribution_tag", Binary),
        etm("dist-tags_length", "distribution_tag", Length),
        etm("versions_exist", "published_time", Binary),
        etm("versions_length", "published_time", Length),
        etm("versions_num_count", "published_time", Count),
        etm("maintainers_exist", "maintainers", Binary),
        etm("description_exist", "description", Binary),
        etm("description_length", "description", Length),
        etm("readme_exist", "readme", Binary),
        etm("readme_length", "readme", Length),
        etm("scripts_exist", "scripts", Binary),
        etm("scripts_length", "scripts", Length),
        etm("author_exist", "authors", Binary),
        etm("author_name", "authors", Binary),
        etm("author_email", "authors", Binary),
        etm("License_exist", "licenses", Binary),
        etm("License_length", "licenses", Length),
        etm("directories_exist", "directories", Binary),
        etm("directories_length", "directories", Length),
        etm("keywords_exist", "keywords", Binary),
        etm("keywords_length", "keywords", Length),
        etm("keywords_num_count", "keywords", Count),
        etm("homepage_exist", "homepage_link", Binary),
        etm("homepage_length", "homepage_link", Length),
        etm("github_exist", "github_link", Binary),
        etm("github_length", "github_link", Length),
        etm("bugslink_exist", "bugs_link", Binary),
        etm("bugslink_length", "bugs_link", Length),
        etm("issueslink_exist", "issues_link", Binary),
        etm("issueslink_length", "issues_link", Length),
        etm("dependencies_exist", "dependencies", Binary),
        etm("dependencies_length", "dependencies", Length),
        etm("devDependencies_exist", "development_dependencies", Binary),
        etm("devDependencies_length", "development_dependencies", Length),
        dtm_monotonic("package_age", "created_time", DurationDays),
        dtm_monotonic("package_modified_duration", "modified_time", DurationDays),
        dtm_monotonic("package_published_duration", "published_time", DurationDays),
    ];
    for role in ["author", "maintainer", "contributor", "publisher"] {
        features.push(dtm_monotonic(
            &format!("{role}_CPN"),
            "stakeholder_history",
            Count,
        ));
        features.push(dtm_monotonic(
            &format!("{role}_service_time"),
            "stakeholder_history",
            DurationDays,
        ));
        features.push(dtm_monotonic(
            &format!("{role}_CCS"),
            "stakeholder_history",
            Score,
        ));
    }
    for name in [
        "pull_request",
        "issues",
        "fork_number",
        "star",
        "subscriber_count",
    ] {
        features.push(dtm_restricted(name));
    }
    FeatureCatalog { features }
}

/// Extra ETM feature counting special characters in the package name.
/// Implemented but excluded from the canonical catalog.
pub fn name_special_char_descriptor() -> FeatureDescriptor {
    etm("name_special_char", "package_name", ValueKind::Count)
}

/// Canonical catalog plus [`name_special_char_descriptor`] appended to the
/// ETM block.
pub fn catalog_extended() -> FeatureCatalog {
    let base = catalog();
    let mut features = Vec::with_capacity(base.len() + 1);
    for f in base.features {
        if f.klass == FeatureClass::Dtm && features.len() == 36 {
            features.push(name_special_char_descriptor());
        }
        features.push(f);
    }
    FeatureCatalog { features }
}

/// Keep the selected features of `cat`, preserving its order.
pub fn subset(cat: &FeatureCatalog, selector: &Selector) -> Result<FeatureCatalog, CatalogError> {
    let features = match selector {
        Selector::All => cat.features.clone(),
        Selector::EtmOnly => cat
            .features
            .iter()
            .filter(|f| f.klass == FeatureClass::Etm)
            .cloned()
            .collect(),
        Selector::DtmOnly => cat
            .features
            .iter()
            .filter(|f| f.klass == FeatureClass::Dtm)
            .cloned()
            .collect(),
        Selector::ExistingTec => {
            let names: Vec<String> = EXISTING_TEC_DEFAULT.iter().map(|s| s.to_string()).collect();
            return subset(cat, &Selector::Named(names));
        }
        Selector::Named(names) => {
            for name in names {
                if !cat.features.iter().any(|f| &f.name == name) {
                    return Err(CatalogError::UnknownFeature(name.clone()));
                }
            }
            cat.features
                .iter()
                .filter(|f| names.contains(&f.name))
                .cloned()
                .collect()
        }
    };
    Ok(FeatureCatalog { features })
}

impl FeatureCatalog {
    /// Build a custom catalog. Names must be unique.
    pub fn from_descriptors(features: Vec<FeatureDescriptor>) -> Self {
        let mut seen = std::collections::BTreeSet::new();
        for f in &features {
            assert!(seen.insert(f.name.clone()), "duplicate feature {}", f.name);
        }
        FeatureCatalog { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn descriptor(&self, name: &str) -> Option<&FeatureDescriptor> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn count_class(&self, klass: FeatureClass) -> usize {
        self.features.iter().filter(|f| f.klass == klass).count()
    }

    /// SHA-256 of the ordered name list; pins matrix column order.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for name in self.names() {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hex_string(&hasher.finalize())
    }

    /// Dump the descriptor table as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "name,class,monotonic,restricted_control,source_information,value_kind"
        )?;
        for f in &self.features {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                f.name,
                f.klass.as_str(),
                f.monotonic,
                f.restricted_control,
                f.source_information,
                f.value_kind.as_str()
            )?;
        }
        Ok(())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Frozen column-order pin; changing catalog order is a breaking change.
    const CATALOG_FINGERPRINT: &str =
        "9eca201f4c73674fadd0825dc57d8e2b00fe48dc60f374ad93f43de5cdc67a1b";

    #[test]
    fn counts_are_36_etm_plus_20_dtm() {
        let cat = catalog();
        assert_eq!(cat.count_class(FeatureClass::Etm), 36);
        assert_eq!(cat.count_class(FeatureClass::Dtm), 20);
        assert_eq!(cat.len(), 56);
    }

    #[test]
    fn subset_sizes_match_feature_models() {
        let cat = catalog();
        assert_eq!(subset(&cat, &Selector::EtmOnly).unwrap().len(), 36);
        assert_eq!(subset(&cat, &Selector::DtmOnly).unwrap().len(), 20);
        assert_eq!(subset(&cat, &Selector::ExistingTec).unwrap().len(), 11);
        assert_eq!(subset(&cat, &Selector::All).unwrap().len(), 56);
    }

    #[test]
    fn unknown_feature_is_rejected() {
        let cat = catalog();
        let err = subset(&cat, &Selector::Named(vec!["nope".into()])).unwrap_err();
        assert!(matches!(err, CatalogError::UnknownFeature(n) if n == "nope"));
    }

    #[test]
    fn star_is_restricted_control() {
        let cat = catalog();
        let star = cat.descriptor("star").unwrap();
        assert!(star.restricted_control);
        assert!(!star.monotonic);
        assert_eq!(star.klass, FeatureClass::Dtm);
    }

    #[test]
    fn dtm_rule_partitions_the_catalog() {
        for f in catalog().features() {
            let dtm = f.monotonic || f.restricted_control;
            assert_eq!(
                f.klass == FeatureClass::Dtm,
                dtm,
                "{} violates the DTM rule",
                f.name
            );
        }
    }

    #[test]
    fn names_are_unique() {
        let cat = catalog();
        let set: BTreeSet<&str> = cat.names().collect();
        assert_eq!(set.len(), cat.len());
    }

    #[test]
    fn order_is_pinned() {
        assert_eq!(catalog().fingerprint(), CATALOG_FINGERPRINT);
    }

    #[test]
    fn subset_preserves_parent_order() {
        let cat = catalog();
        let sub = subset(
            &cat,
            &Selector::Named(vec!["star".into(), "name_exist".into()]),
        )
        .unwrap();
        let names: Vec<&str> = sub.names().collect();
        assert_eq!(names, vec!["name_exist", "star"]);
    }

    #[test]
    fn existing_tec_members_are_etm() {
        let cat = catalog();
        let sub = subset(&cat, &Selector::ExistingTec).unwrap();
        assert!(sub.features().iter().all(|f| f.klass == FeatureClass::Etm));
    }

    #[test]
    fn extended_catalog_adds_special_char_feature() {
        let ext = catalog_extended();
        assert_eq!(ext.len(), 57);
        assert_eq!(ext.count_class(FeatureClass::Etm), 37);
        assert!(ext.descriptor("name_special_char").is_some());
        assert!(catalog().descriptor("name_special_char").is_none());
    }

    #[test]
    fn monotonic_flags_cover_temporal_and_contribution_features() {
        let cat = catalog();
        for name in [
            "package_age",
            "package_modified_duration",
            "package_published_duration",
            "author_service_time",
            "maintainer_CPN",
            "publisher_CCS",
        ] {
            assert!(cat.descriptor(name).unwrap().monotonic, "{name}");
        }
    }

    #[test]
    fn csv_dump_has_header_and_all_rows() {
        let mut buf = Vec::new();
        catalog().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 57);
        assert!(lines[0].starts_with("name,class"));
        assert!(lines.iter().any(|l| l.starts_with("star,DTM,false,true")));
    }
}
