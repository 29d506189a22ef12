//! Package metadata information (PMI): the key-value document a registry
//! serves for one package, normalized into a fixed schema.
//!
//! [`parse_pmi`] accepts both raw registry documents (the
//! `registry.npmjs.org/{name}` response shape) and this crate's canonical
//! serialized form, so records round-trip through serde unchanged.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PmiError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("document has no package name")]
    MissingName,
}

/// One stakeholder entry: a person or organisation attached to a package.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Person {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
}

impl Person {
    pub fn named(name: &str) -> Self {
        Person {
            name: Some(name.to_string()),
            email: None,
        }
    }

    pub fn with_email(name: &str, email: &str) -> Self {
        Person {
            name: Some(name.to_string()),
            email: Some(email.to_string()),
        }
    }

    /// Normalized identity: lowercased, trimmed `name|email`.
    pub fn identity(&self) -> String {
        let norm = |s: &Option<String>| {
            s.as_deref()
                .map(|v| v.trim().to_lowercase())
                .unwrap_or_default()
        };
        format!("{}|{}", norm(&self.name), norm(&self.email))
    }

    pub fn is_empty(&self) -> bool {
        self.name.as_deref().is_none_or(|s| s.trim().is_empty())
            && self.email.as_deref().is_none_or(|s| s.trim().is_empty())
    }
}

/// Repository interaction counts; stakeholders cannot set these directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InteractionCounts {
    #[serde(default)]
    pub pull_request: u64,
    #[serde(default)]
    pub issues: u64,
    #[serde(default)]
    pub fork_number: u64,
    #[serde(default)]
    pub star: u64,
    #[serde(default)]
    pub subscriber_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StakeholderRole {
    Author,
    Maintainer,
    Contributor,
    Publisher,
}

impl StakeholderRole {
    pub const ALL: [StakeholderRole; 4] = [
        StakeholderRole::Author,
        StakeholderRole::Maintainer,
        StakeholderRole::Contributor,
        StakeholderRole::Publisher,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StakeholderRole::Author => "author",
            StakeholderRole::Maintainer => "maintainer",
            StakeholderRole::Contributor => "contributor",
            StakeholderRole::Publisher => "publisher",
        }
    }
}

/// Cross-package view of one stakeholder: when they first appeared and how
/// many distinct packages list them (CPN). Not part of the registry
/// document; supplied by corpus aggregation or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderRecord {
    pub role: StakeholderRole,
    pub first_seen: DateTime<Utc>,
    pub contributed_package_count: u64,
}

/// Parsed package metadata document.
///
/// All list and map fields are always present (possibly empty) after
/// parsing; optional scalars are `None` when the document lacks them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageMetadata {
    pub package_name: String,
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub readme: Option<String>,
    #[serde(default)]
    pub scripts: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub distribution_tags: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub authors: Vec<Person>,
    #[serde(default)]
    pub contributors: Vec<Person>,
    #[serde(default)]
    pub maintainers: Vec<Person>,
    #[serde(default)]
    pub publishers: Vec<Person>,
    #[serde(default)]
    pub licenses: Option<String>,
    #[serde(default)]
    pub dependencies: BTreeMap<String, String>,
    #[serde(default)]
    pub development_dependencies: BTreeMap<String, String>,
    /// Defaults to the Unix epoch when the document has no creation time.
    #[serde(default = "epoch")]
    pub created_time: DateTime<Utc>,
    #[serde(default)]
    pub modified_time: Option<DateTime<Utc>>,
    #[serde(default)]
    pub published_times: BTreeMap<String, DateTime<Utc>>,
    #[serde(default)]
    pub npm_link: Option<String>,
    #[serde(default)]
    pub homepage_link: Option<String>,
    #[serde(default)]
    pub github_link: Option<String>,
    #[serde(default)]
    pub bugs_link: Option<String>,
    #[serde(default)]
    pub issues_link: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    /// Opaque tag count; the registry never defines how it is computed.
    #[serde(default)]
    pub tags: Option<u64>,
    #[serde(default)]
    pub directories: Option<BTreeMap<String, String>>,
    #[serde(default)]
    pub interactions: InteractionCounts,
    #[serde(default)]
    pub stakeholder_history: BTreeMap<String, StakeholderRecord>,
    /// Unknown document keys, preserved but ignored by feature extraction.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

fn epoch() -> DateTime<Utc> {
    Utc.timestamp_opt(0, 0).unwrap()
}

impl PackageMetadata {
    /// Minimal record: a name and defaults everywhere else.
    pub fn named(name: &str) -> Self {
        PackageMetadata {
            package_name: name.to_string(),
            version: String::new(),
            description: None,
            readme: None,
            scripts: None,
            distribution_tags: None,
            authors: Vec::new(),
            contributors: Vec::new(),
            maintainers: Vec::new(),
            publishers: Vec::new(),
            licenses: None,
            dependencies: BTreeMap::new(),
            development_dependencies: BTreeMap::new(),
            created_time: epoch(),
            modified_time: None,
            published_times: BTreeMap::new(),
            npm_link: None,
            homepage_link: None,
            github_link: None,
            bugs_link: None,
            issues_link: None,
            keywords: Vec::new(),
            tags: None,
            directories: None,
            interactions: InteractionCounts::default(),
            stakeholder_history: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn stakeholders(&self, role: StakeholderRole) -> &[Person] {
        match role {
            StakeholderRole::Author => &self.authors,
            StakeholderRole::Maintainer => &self.maintainers,
            StakeholderRole::Contributor => &self.contributors,
            StakeholderRole::Publisher => &self.publishers,
        }
    }

    /// Earliest published timestamp across versions, if any.
    pub fn first_published(&self) -> Option<DateTime<Utc>> {
        self.published_times.values().min().copied()
    }
}

/// A metadata record plus its benign (0) / malicious (1) label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPmi {
    #[serde(rename = "package")]
    pub metadata: PackageMetadata,
    pub label: u8,
}

// ─── Parsing ─────────────────────────────────────────────────────────────────

/// Parse a registry JSON document into a [`PackageMetadata`].
///
/// Accepts the raw `registry.npmjs.org` packument shape as well as this
/// crate's canonical form. Absent keys become empty/none defaults; nothing
/// is fabricated. Unparseable timestamps are dropped with a logged warning.
pub fn parse_pmi(raw_document: &str) -> Result<PackageMetadata, PmiError> {
    let value: Value = serde_json::from_str(raw_document)
        .map_err(|e| PmiError::MalformedDocument(e.to_string()))?;
    parse_pmi_value(&value)
}

pub fn parse_pmi_value(value: &Value) -> Result<PackageMetadata, PmiError> {
    let obj = value
        .as_object()
        .ok_or_else(|| PmiError::MalformedDocument("top level is not an object".into()))?;

    // Canonical form round-trips through serde directly.
    if obj.contains_key("package_name") {
        let pm: PackageMetadata = serde_json::from_value(value.clone())
            .map_err(|e| PmiError::MalformedDocument(e.to_string()))?;
        if pm.package_name.is_empty() {
            return Err(PmiError::MissingName);
        }
        return Ok(pm);
    }

    let name = obj
        .get("name")
        .or_else(|| obj.get("_id"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .filter(|s| !s.is_empty())
        .ok_or(PmiError::MissingName)?;

    let mut pm = PackageMetadata::named(&name);

    // Timestamps live under "time": { created, modified, <version>: ts }.
    if let Some(time) = obj.get("time").and_then(Value::as_object) {
        for (key, v) in time {
            let Some(text) = v.as_str() else { continue };
            let Some(ts) = parse_timestamp(text) else {
                log::warn!("{name}: unparseable timestamp for {key:?}: {text:?}");
                continue;
            };
            match key.as_str() {
                "created" => pm.created_time = ts,
                "modified" => pm.modified_time = Some(ts),
                _ => {
                    pm.published_times.insert(key.clone(), ts);
                }
            }
        }
    }

    if let Some(tags) = obj.get("dist-tags").and_then(Value::as_object) {
        let map = string_map(tags);
        if !map.is_empty() {
            pm.distribution_tags = Some(map);
        }
    }

    pm.version = pm
        .distribution_tags
        .as_ref()
        .and_then(|t| t.get("latest").cloned())
        .or_else(|| obj.get("version").and_then(Value::as_str).map(str::to_string))
        .or_else(|| {
            // Fall back to the most recently published version.
            pm.published_times
                .iter()
                .max_by_key(|(_, ts)| **ts)
                .map(|(v, _)| v.clone())
        })
        .unwrap_or_default();

    // The version object for the resolved version carries most descriptive
    // fields; top-level keys act as fallbacks.
    let version_obj = obj
        .get("versions")
        .and_then(Value::as_object)
        .and_then(|vs| vs.get(&pm.version))
        .and_then(Value::as_object);
    let lookup = |key: &str| -> Option<&Value> {
        version_obj
            .and_then(|vo| vo.get(key))
            .or_else(|| obj.get(key))
    };

    pm.description = lookup("description")
        .and_then(Value::as_str)
        .map(str::to_string);
    pm.readme = lookup("readme").and_then(Value::as_str).map(str::to_string);
    pm.scripts = lookup("scripts")
        .and_then(Value::as_object)
        .map(string_map)
        .filter(|m| !m.is_empty());
    pm.directories = lookup("directories")
        .and_then(Value::as_object)
        .map(string_map)
        .filter(|m| !m.is_empty());
    pm.licenses = lookup("licenses")
        .or_else(|| lookup("license"))
        .and_then(license_string);
    pm.dependencies = lookup("dependencies")
        .and_then(Value::as_object)
        .map(string_map)
        .unwrap_or_default();
    pm.development_dependencies = lookup("development_dependencies")
        .or_else(|| lookup("devDependencies"))
        .and_then(Value::as_object)
        .map(string_map)
        .unwrap_or_default();
    pm.keywords = lookup("keywords")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();

    pm.authors = lookup("authors")
        .or_else(|| lookup("author"))
        .map(parse_people)
        .unwrap_or_default();
    pm.contributors = lookup("contributors").map(parse_people).unwrap_or_default();
    pm.maintainers = lookup("maintainers").map(parse_people).unwrap_or_default();
    pm.publishers = lookup("publishers")
        .or_else(|| lookup("_npmUser"))
        .map(parse_people)
        .unwrap_or_default();

    pm.npm_link = lookup("npm_link").and_then(Value::as_str).map(str::to_string);
    pm.homepage_link = lookup("homepage_link")
        .or_else(|| lookup("homepage"))
        .and_then(Value::as_str)
        .map(str::to_string);
    pm.github_link = lookup("github_link")
        .or_else(|| lookup("repository"))
        .and_then(link_string);
    pm.bugs_link = lookup("bugs_link")
        .or_else(|| lookup("bugs"))
        .and_then(link_string);
    pm.issues_link = lookup("issues_link")
        .or_else(|| lookup("issues").filter(|v| v.is_string()))
        .and_then(Value::as_str)
        .map(str::to_string);

    pm.tags = obj.get("tags").and_then(Value::as_u64);

    pm.interactions = InteractionCounts {
        pull_request: count_of(obj, "pull_request"),
        issues: obj
            .get("issues")
            .and_then(Value::as_u64)
            .unwrap_or_default(),
        fork_number: count_of(obj, "fork_number"),
        star: count_of(obj, "star"),
        subscriber_count: count_of(obj, "subscriber_count"),
    };

    const KNOWN: &[&str] = &[
        "name", "_id", "time", "dist-tags", "version", "versions", "description", "readme",
        "scripts", "directories", "licenses", "license", "dependencies",
        "development_dependencies", "devDependencies", "keywords", "authors", "author",
        "contributors", "maintainers", "publishers", "_npmUser", "npm_link", "homepage_link",
        "homepage", "github_link", "repository", "bugs_link", "bugs", "issues_link", "issues",
        "tags", "pull_request", "fork_number", "star", "subscriber_count", "interactions",
    ];
    for (key, v) in obj {
        if !KNOWN.contains(&key.as_str()) {
            pm.extra.insert(key.clone(), v.clone());
        }
    }
    if let Some(counts) = obj.get("interactions") {
        if let Ok(parsed) = serde_json::from_value::<InteractionCounts>(counts.clone()) {
            pm.interactions = parsed;
        }
    }

    Ok(pm)
}

fn count_of(obj: &serde_json::Map<String, Value>, key: &str) -> u64 {
    obj.get(key).and_then(Value::as_u64).unwrap_or_default()
}

fn string_map(obj: &serde_json::Map<String, Value>) -> BTreeMap<String, String> {
    obj.iter()
        .map(|(k, v)| {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect()
}

fn license_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Object(o) => o.get("type").and_then(Value::as_str).map(str::to_string),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(license_string).collect();
            (!parts.is_empty()).then(|| parts.join(","))
        }
        _ => None,
    }
}

fn link_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Object(o) => o.get("url").and_then(Value::as_str).map(str::to_string),
        _ => None,
    }
}

/// Registry documents store people as a string, an object, or a list of
/// either; the normalized form is always a list.
fn parse_people(v: &Value) -> Vec<Person> {
    match v {
        Value::Array(items) => items.iter().filter_map(parse_person).collect(),
        other => parse_person(other).into_iter().collect(),
    }
}

fn parse_person(v: &Value) -> Option<Person> {
    match v {
        // npm convention: "Name <email> (url)"
        Value::String(s) => {
            let mut name = s.clone();
            let mut email = None;
            if let (Some(start), Some(end)) = (s.find('<'), s.find('>')) {
                if start < end {
                    email = Some(s[start + 1..end].trim().to_string()).filter(|e| !e.is_empty());
                    name = s[..start].to_string();
                }
            }
            if let Some(paren) = name.find('(') {
                name.truncate(paren);
            }
            let name = name.trim().to_string();
            let person = Person {
                name: (!name.is_empty()).then_some(name),
                email,
            };
            (!person.is_empty()).then_some(person)
        }
        Value::Object(o) => {
            let person = Person {
                name: o
                    .get("name")
                    .and_then(Value::as_str)
                    .map(|s| s.to_string())
                    .filter(|s| !s.trim().is_empty()),
                email: o
                    .get("email")
                    .and_then(Value::as_str)
                    .map(|s| s.to_string())
                    .filter(|s| !s.trim().is_empty()),
            };
            (!person.is_empty()).then_some(person)
        }
        _ => None,
    }
}

/// Timestamps without a timezone suffix are treated as UTC.
pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Some(ts.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(Utc.from_utc_datetime(&naive));
    }
    if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0)?));
    }
    None
}

// ─── Validation ──────────────────────────────────────────────────────────────

/// One invariant violation: which field broke which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every record invariant; violations are data, not errors.
pub fn validate_pmi(pmi: &PackageMetadata) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |field: &str, rule: &str, detail: String| {
        report.violations.push(Violation {
            field: field.to_string(),
            rule: rule.to_string(),
            detail,
        });
    };

    if pmi.package_name.trim().is_empty() {
        push("package_name", "empty-name", "package name is empty".into());
    }
    if let Some(modified) = pmi.modified_time {
        if pmi.created_time > modified {
            push(
                "modified_time",
                "time-order",
                format!("created {} after modified {}", pmi.created_time, modified),
            );
        }
    }
    for (version, ts) in &pmi.published_times {
        if pmi.created_time > *ts {
            push(
                "published_times",
                "time-order",
                format!("created {} after publish of {version}", pmi.created_time),
            );
        }
    }
    for role in StakeholderRole::ALL {
        for person in pmi.stakeholders(role) {
            if person.is_empty() {
                push(
                    role.as_str(),
                    "empty-person",
                    "person with neither name nor email".into(),
                );
            }
        }
    }
    for (id, record) in &pmi.stakeholder_history {
        if record.contributed_package_count == 0 {
            push(
                "stakeholder_history",
                "zero-cpn",
                format!("{id} has CPN 0"),
            );
        }
    }

    report
}
