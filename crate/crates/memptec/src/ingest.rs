//! Registry ingestion: fetch package documents and repository interaction
//! counts over HTTP with an on-disk cache, aggregate stakeholder history
//! across a corpus, and load labeled fixture corpora from JSON Lines.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration as StdDuration, Instant};

use chrono::{DateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::pmi::{
    parse_pmi, parse_pmi_value, InteractionCounts, LabeledPmi, PackageMetadata, PmiError,
    StakeholderRecord, StakeholderRole,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("package not found: {0}")]
    NotFound(String),
    #[error("network unavailable: {0}")]
    NetworkUnavailable(String),
    #[error(transparent)]
    Malformed(#[from] PmiError),
    #[error("unsupported repository host: {0}")]
    UnsupportedHost(String),
    #[error("line {line}: label must be 0 or 1, got {value}")]
    BadLabel { line: usize, value: Value },
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Never open a network connection.
    OfflineOnly,
    /// Serve fresh cache entries without network; fetch otherwise.
    CacheFirst,
    /// Always revalidate (conditional request when an ETag is cached).
    Refresh,
}

#[derive(Debug, Clone)]
pub struct CachePolicy {
    pub mode: CacheMode,
    pub cache_dir: PathBuf,
    pub max_age: StdDuration,
}

impl CachePolicy {
    pub fn offline(cache_dir: impl Into<PathBuf>) -> Self {
        CachePolicy {
            mode: CacheMode::OfflineOnly,
            cache_dir: cache_dir.into(),
            max_age: StdDuration::from_secs(24 * 3600),
        }
    }

    pub fn cache_first(cache_dir: impl Into<PathBuf>) -> Self {
        CachePolicy {
            mode: CacheMode::CacheFirst,
            ..CachePolicy::offline(cache_dir)
        }
    }

    pub fn refresh(cache_dir: impl Into<PathBuf>) -> Self {
        CachePolicy {
            mode: CacheMode::Refresh,
            ..CachePolicy::offline(cache_dir)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchBudget {
    pub max_concurrent: usize,
    pub requests_per_second: f64,
    pub retries: u32,
}

impl Default for FetchBudget {
    fn default() -> Self {
        FetchBudget {
            max_concurrent: 4,
            requests_per_second: 2.0,
            retries: 3,
        }
    }
}

/// Sidecar metadata stored next to every cached document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheMeta {
    fetch_time: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    etag: Option<String>,
}

/// Spaces requests so the observed rate never exceeds the budget.
struct RateLimiter {
    next_free: Mutex<Instant>,
    interval: StdDuration,
}

impl RateLimiter {
    fn new(requests_per_second: f64) -> Self {
        RateLimiter {
            next_free: Mutex::new(Instant::now()),
            interval: StdDuration::from_secs_f64(1.0 / requests_per_second),
        }
    }

    fn acquire(&self) {
        let wait_until = {
            let mut next = self.next_free.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if wait_until > now {
            std::thread::sleep(wait_until - now);
        }
    }
}

/// HTTP client for the package registry and the repository-hosting API.
pub struct RegistryClient {
    registry_base: String,
    repo_api_base: String,
    policy: CachePolicy,
    budget: FetchBudget,
    token: Option<String>,
    agent: ureq::Agent,
    limiter: RateLimiter,
    network_calls: AtomicUsize,
}

pub const DEFAULT_REGISTRY: &str = "https://registry.npmjs.org";
pub const DEFAULT_REPO_API: &str = "https://api.github.com";

// Everything outside [A-Za-z0-9_.-@] is escaped in cache file names.
const FILE_SAFE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'_')
    .remove(b'.')
    .remove(b'-')
    .remove(b'@');

impl RegistryClient {
    pub fn new(policy: CachePolicy, budget: FetchBudget) -> Self {
        Self::with_endpoints(DEFAULT_REGISTRY, DEFAULT_REPO_API, policy, budget, None)
    }

    pub fn with_endpoints(
        registry_base: &str,
        repo_api_base: &str,
        policy: CachePolicy,
        budget: FetchBudget,
        token: Option<String>,
    ) -> Self {
        assert!(budget.max_concurrent >= 1, "max_concurrent must be >= 1");
        assert!(
            budget.requests_per_second > 0.0,
            "requests_per_second must be positive"
        );
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(StdDuration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = RateLimiter::new(budget.requests_per_second);
        RegistryClient {
            registry_base: registry_base.trim_end_matches('/').to_string(),
            repo_api_base: repo_api_base.trim_end_matches('/').to_string(),
            policy,
            budget,
            token,
            agent,
            limiter,
            network_calls: AtomicUsize::new(0),
        }
    }

    /// Network requests issued so far (cache hits do not count).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::Relaxed)
    }

    fn cache_paths(&self, name: &str) -> (PathBuf, PathBuf) {
        let safe = utf8_percent_encode(name, FILE_SAFE).to_string();
        let body = self.policy.cache_dir.join(format!("{safe}.json"));
        let meta = self.policy.cache_dir.join(format!("{safe}.meta.json"));
        (body, meta)
    }

    fn read_cache(&self, name: &str) -> Option<(String, Option<CacheMeta>)> {
        let (body_path, meta_path) = self.cache_paths(name);
        let body = std::fs::read_to_string(body_path).ok()?;
        let meta = std::fs::read_to_string(meta_path)
            .ok()
            .and_then(|m| serde_json::from_str(&m).ok());
        Some((body, meta))
    }

    fn write_cache(&self, name: &str, body: &str, etag: Option<String>) -> Result<(), IngestError> {
        std::fs::create_dir_all(&self.policy.cache_dir)?;
        let (body_path, meta_path) = self.cache_paths(name);
        atomic_write(&body_path, body.as_bytes())?;
        let meta = CacheMeta {
            fetch_time: Utc::now(),
            etag,
        };
        atomic_write(&meta_path, serde_json::to_string(&meta).unwrap().as_bytes())?;
        Ok(())
    }

    fn cache_is_fresh(&self, meta: &Option<CacheMeta>) -> bool {
        let Some(meta) = meta else { return false };
        let age = Utc::now() - meta.fetch_time;
        age.to_std()
            .map(|a| a <= self.policy.max_age)
            .unwrap_or(false)
    }

    /// One rate-limited GET with retries and exponential backoff.
    /// Returns `(status, body, etag)`; 404 is returned, not retried.
    fn get_with_retries(
        &self,
        url: &str,
        etag: Option<&str>,
    ) -> Result<(u16, String, Option<String>), IngestError> {
        let mut delay = StdDuration::from_millis(150);
        let mut last_error = String::new();
        for attempt in 0..=self.budget.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay = (delay * 2).min(StdDuration::from_secs(10));
            }
            self.limiter.acquire();
            self.network_calls.fetch_add(1, Ordering::Relaxed);

            let mut request = self.agent.get(url).header("Accept", "application/json");
            if let Some(tag) = etag {
                request = request.header("If-None-Match", tag);
            }
            if let Some(token) = &self.token {
                request = request.header("Authorization", format!("Bearer {token}"));
            }
            match request.call() {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if status >= 500 {
                        last_error = format!("server error {status}");
                        continue;
                    }
                    let etag = response
                        .headers()
                        .get("etag")
                        .and_then(|v| v.to_str().ok())
                        .map(str::to_string);
                    let body = response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| IngestError::NetworkUnavailable(e.to_string()))?;
                    return Ok((status, body, etag));
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(IngestError::NetworkUnavailable(format!(
            "{url}: {last_error} (after {} attempts)",
            self.budget.retries + 1
        )))
    }

    /// Fetch one package document, honoring the cache policy, and parse it.
    /// The raw response is persisted to the cache before parsing.
    pub fn fetch_package(&self, name: &str) -> Result<PackageMetadata, IngestError> {
        assert!(!name.is_empty(), "package name must be non-empty");
        let cached = self.read_cache(name);
        match self.policy.mode {
            CacheMode::OfflineOnly => {
                let (body, _) = cached.ok_or_else(|| {
                    IngestError::NetworkUnavailable(format!("{name}: not cached (offline mode)"))
                })?;
                return Ok(parse_pmi(&body)?);
            }
            CacheMode::CacheFirst => {
                if let Some((body, meta)) = &cached {
                    if self.cache_is_fresh(meta) {
                        return Ok(parse_pmi(body)?);
                    }
                }
            }
            CacheMode::Refresh => {}
        }

        let url = format!("{}/{}", self.registry_base, name.replace('/', "%2F"));
        let etag = cached
            .as_ref()
            .and_then(|(_, meta)| meta.as_ref())
            .and_then(|m| m.etag.clone());
        let (status, body, new_etag) = self.get_with_retries(&url, etag.as_deref())?;
        match status {
            404 => Err(IngestError::NotFound(name.to_string())),
            304 => {
                let (body, _) = cached.ok_or_else(|| {
                    IngestError::NetworkUnavailable(format!("{name}: 304 without cache"))
                })?;
                self.write_cache(name, &body, etag)?;
                Ok(parse_pmi(&body)?)
            }
            _ => {
                self.write_cache(name, &body, new_etag)?;
                Ok(parse_pmi(&body)?)
            }
        }
    }

    /// Fetch many packages with at most `max_concurrent` in flight.
    pub fn fetch_many(
        &self,
        names: &[String],
    ) -> Vec<(String, Result<PackageMetadata, IngestError>)> {
        let queue = Mutex::new(names.iter().cloned().enumerate().collect::<Vec<_>>());
        let results = Mutex::new(BTreeMap::new());
        std::thread::scope(|scope| {
            for _ in 0..self.budget.max_concurrent.min(names.len().max(1)) {
                scope.spawn(|| loop {
                    let Some((index, name)) = queue.lock().unwrap().pop() else {
                        break;
                    };
                    let outcome = self.fetch_package(&name);
                    results.lock().unwrap().insert(index, (name, outcome));
                });
            }
        });
        results.into_inner().unwrap().into_values().collect()
    }

    /// Fetch star/fork/issue/subscriber/PR counts for a repository URL.
    /// Counts the API does not report come back as 0 with a warning.
    pub fn fetch_repo_interactions(
        &self,
        repo_url: &str,
    ) -> Result<InteractionCounts, IngestError> {
        let (owner, repo) = parse_github_url(repo_url)?;
        if self.policy.mode == CacheMode::OfflineOnly {
            return Err(IngestError::NetworkUnavailable(format!(
                "{repo_url}: interactions need network (offline mode)"
            )));
        }
        let url = format!("{}/repos/{owner}/{repo}", self.repo_api_base);
        let (status, body, _) = self.get_with_retries(&url, None)?;
        if status == 404 {
            return Err(IngestError::NotFound(format!("{owner}/{repo}")));
        }
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| PmiError::MalformedDocument(e.to_string()))?;
        let count = |key: &str| -> u64 {
            match value.get(key).and_then(Value::as_u64) {
                Some(v) => v,
                None => {
                    log::warn!("{owner}/{repo}: API field {key} missing, defaulting to 0");
                    0
                }
            }
        };
        Ok(InteractionCounts {
            pull_request: count("open_pull_requests_count"),
            issues: count("open_issues_count"),
            fork_number: count("forks_count"),
            star: count("stargazers_count"),
            subscriber_count: count("subscribers_count"),
        })
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Extract `(owner, repo)` from a GitHub-style repository URL.
fn parse_github_url(repo_url: &str) -> Result<(String, String), IngestError> {
    let trimmed = repo_url
        .trim_start_matches("git+")
        .trim_start_matches("https://")
        .trim_start_matches("http://")
        .trim_start_matches("git://");
    let mut parts = trimmed.split('/');
    let host = parts.next().unwrap_or_default();
    if host != "github.com" && host != "www.github.com" {
        return Err(IngestError::UnsupportedHost(host.to_string()));
    }
    let owner = parts.next().filter(|s| !s.is_empty());
    let repo = parts
        .next()
        .map(|r| r.trim_end_matches(".git"))
        .filter(|s| !s.is_empty());
    match (owner, repo) {
        (Some(owner), Some(repo)) => Ok((owner.to_string(), repo.to_string())),
        _ => Err(IngestError::UnsupportedHost(format!(
            "{repo_url}: missing owner/repo path"
        ))),
    }
}

// ─── Stakeholder history ─────────────────────────────────────────────────────

/// Aggregate per-person history across a corpus: CPN is the number of
/// distinct packages listing the person in any role, first_seen the
/// earliest creation time among them. Person identity is the normalized
/// (lowercased, trimmed) name+email pair.
pub fn build_stakeholder_history(
    corpus: &[PackageMetadata],
) -> BTreeMap<String, StakeholderRecord> {
    struct Partial {
        role: StakeholderRole,
        first_seen: DateTime<Utc>,
        packages: BTreeSet<String>,
    }
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();
    for pm in corpus {
        for role in StakeholderRole::ALL {
            for person in pm.stakeholders(role) {
                let id = person.identity();
                let entry = partials.entry(id).or_insert_with(|| Partial {
                    role,
                    first_seen: pm.created_time,
                    packages: BTreeSet::new(),
                });
                entry.first_seen = entry.first_seen.min(pm.created_time);
                entry.packages.insert(pm.package_name.clone());
            }
        }
    }
    partials
        .into_iter()
        .map(|(id, p)| {
            (
                id,
                StakeholderRecord {
                    role: p.role,
                    first_seen: p.first_seen,
                    contributed_package_count: p.packages.len() as u64,
                },
            )
        })
        .collect()
}

/// Attach aggregated history to every record of a corpus.
pub fn attach_stakeholder_history(corpus: &mut [PackageMetadata]) {
    let history = build_stakeholder_history(corpus);
    for pm in corpus.iter_mut() {
        let mut own = BTreeMap::new();
        for role in StakeholderRole::ALL {
            for person in pm.stakeholders(role) {
                let id = person.identity();
                if let Some(record) = history.get(&id) {
                    own.insert(id, record.clone());
                }
            }
        }
        pm.stakeholder_history = own;
    }
}

// ─── Labeled corpora on disk ─────────────────────────────────────────────────

/// Load a JSON Lines corpus: one `{"package": <document>, "label": 0|1}`
/// per line. Line order is preserved; errors carry 1-based line numbers.
pub fn load_fixture_corpus(path: &Path) -> Result<Vec<LabeledPmi>, IngestError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut corpus = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| IngestError::BadLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let label_value = value.get("label").cloned().unwrap_or(Value::Null);
        let label = match label_value.as_u64() {
            Some(0) => 0u8,
            Some(1) => 1u8,
            _ => {
                return Err(IngestError::BadLabel {
                    line: line_no,
                    value: label_value,
                })
            }
        };
        let doc = value.get("package").ok_or_else(|| IngestError::BadLine {
            line: line_no,
            message: "missing `package` key".to_string(),
        })?;
        let metadata = parse_pmi_value(doc).map_err(|e| IngestError::BadLine {
            line: line_no,
            message: e.to_string(),
        })?;
        corpus.push(LabeledPmi { metadata, label });
    }
    Ok(corpus)
}

/// Write a corpus in the same JSON Lines shape `load_fixture_corpus` reads.
pub fn write_corpus_jsonl<W: Write>(corpus: &[LabeledPmi], mut w: W) -> std::io::Result<()> {
    for record in corpus {
        let line = serde_json::to_string(record).expect("corpus records serialize");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmi::Person;
    use chrono::TimeZone;
    use std::io::Read;
    use std::net::TcpListener;
    use std::sync::Arc;

    /// Minimal HTTP/1.1 stub: answers every request with the canned
    /// response chosen per path, counting hits.
    struct StubServer {
        addr: String,
        hits: Arc<AtomicUsize>,
        shutdown: Arc<std::sync::atomic::AtomicBool>,
        handle: Option<std::thread::JoinHandle<()>>,
    }

    impl StubServer {
        fn start(respond: impl Fn(&str) -> (u16, String) + Send + 'static) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = format!("http://{}", listener.local_addr().unwrap());
            listener.set_nonblocking(true).unwrap();
            let hits = Arc::new(AtomicUsize::new(0));
            let shutdown = Arc::new(std::sync::atomic::AtomicBool::new(false));
            let hits_clone = hits.clone();
            let shutdown_clone = shutdown.clone();
            let handle = std::thread::spawn(move || loop {
                if shutdown_clone.load(Ordering::Relaxed) {
                    break;
                }
                match listener.accept() {
                    Ok((mut stream, _)) => {
                        stream.set_nonblocking(false).unwrap();
                        let mut buf = [0u8; 4096];
                        let n = stream.read(&mut buf).unwrap_or(0);
                        let request = String::from_utf8_lossy(&buf[..n]).to_string();
                        let path = request
                            .lines()
                            .next()
                            .and_then(|l| l.split_whitespace().nth(1))
                            .unwrap_or("/")
                            .to_string();
                        hits_clone.fetch_add(1, Ordering::Relaxed);
                        let (status, body) = respond(&path);
                        let reason = if status == 200 { "OK" } else { "X" };
                        let response = format!(
                            "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                            body.len()
                        );
                        let _ = stream.write_all(response.as_bytes());
                    }
                    Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(StdDuration::from_millis(2));
                    }
                    Err(_) => break,
                }
            });
            StubServer {
                addr,
                hits,
                shutdown,
                handle: Some(handle),
            }
        }

        fn hits(&self) -> usize {
            self.hits.load(Ordering::Relaxed)
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            self.shutdown.store(true, Ordering::Relaxed);
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }

    fn registry_doc(name: &str) -> String {
        format!(
            r#"{{"name":"{name}","dist-tags":{{"latest":"1.3.2"}},"time":{{"created":"2020-01-01T00:00:00Z","modified":"2021-01-01T00:00:00Z","1.3.2":"2021-01-01T00:00:00Z"}}}}"#
        )
    }

    fn fast_budget() -> FetchBudget {
        FetchBudget {
            max_concurrent: 4,
            requests_per_second: 500.0,
            retries: 1,
        }
    }

    #[test]
    fn refresh_fetch_parses_and_caches() {
        let server = StubServer::start(|path| (200, registry_doc(path.trim_start_matches('/'))));
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        let pm = client.fetch_package("axios").unwrap();
        assert_eq!(pm.package_name, "axios");
        assert_eq!(
            pm.distribution_tags.unwrap().get("latest").unwrap(),
            "1.3.2"
        );
        assert!(dir.path().join("axios.json").exists());
        assert!(dir.path().join("axios.meta.json").exists());
    }

    #[test]
    fn warm_cache_first_fetch_makes_no_network_calls() {
        let server = StubServer::start(|path| (200, registry_doc(path.trim_start_matches('/'))));
        let dir = tempfile::tempdir().unwrap();
        let warm = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        warm.fetch_package("axios").unwrap();
        let hits_after_warm = server.hits();

        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::cache_first(dir.path()),
            fast_budget(),
            None,
        );
        let pm = client.fetch_package("axios").unwrap();
        assert_eq!(pm.package_name, "axios");
        assert_eq!(server.hits(), hits_after_warm);
        assert_eq!(client.network_calls(), 0);
    }

    #[test]
    fn cache_files_are_byte_identical_across_fetches() {
        let server = StubServer::start(|path| (200, registry_doc(path.trim_start_matches('/'))));
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::cache_first(dir.path()),
            fast_budget(),
            None,
        );
        client.fetch_package("axios").unwrap();
        let first = std::fs::read(dir.path().join("axios.json")).unwrap();
        client.fetch_package("axios").unwrap();
        let second = std::fs::read(dir.path().join("axios.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn missing_package_is_not_found() {
        let server = StubServer::start(|_| (404, r#"{"error":"Not found"}"#.to_string()));
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        let err = client
            .fetch_package("definitely-not-a-real-pkg-xyz")
            .unwrap_err();
        assert!(matches!(err, IngestError::NotFound(_)));
    }

    #[test]
    fn offline_miss_is_network_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            "http://127.0.0.1:9",
            "http://127.0.0.1:9",
            CachePolicy::offline(dir.path()),
            fast_budget(),
            None,
        );
        assert!(matches!(
            client.fetch_package("axios"),
            Err(IngestError::NetworkUnavailable(_))
        ));
        assert!(matches!(
            client.fetch_repo_interactions("https://github.com/a/b"),
            Err(IngestError::NetworkUnavailable(_))
        ));
    }

    #[test]
    fn repo_interactions_map_api_fields() {
        let server = StubServer::start(|_| {
            (
                200,
                r#"{"stargazers_count":10300,"forks_count":10900,"open_issues_count":488}"#
                    .to_string(),
            )
        });
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        let counts = client
            .fetch_repo_interactions("https://github.com/axios/axios.git")
            .unwrap();
        assert_eq!(counts.star, 10_300);
        assert_eq!(counts.fork_number, 10_900);
        assert_eq!(counts.issues, 488);
        // fields the API did not report default to zero
        assert_eq!(counts.subscriber_count, 0);
        assert_eq!(counts.pull_request, 0);
    }

    #[test]
    fn non_github_hosts_are_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            "http://127.0.0.1:9",
            "http://127.0.0.1:9",
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        assert!(matches!(
            client.fetch_repo_interactions("https://gitlab.com/a/b"),
            Err(IngestError::UnsupportedHost(_))
        ));
        assert!(matches!(
            client.fetch_repo_interactions("https://github.com/only-owner"),
            Err(IngestError::UnsupportedHost(_))
        ));
    }

    #[test]
    fn fetch_many_respects_the_rate_budget() {
        let server = StubServer::start(|path| (200, registry_doc(path.trim_start_matches('/'))));
        let dir = tempfile::tempdir().unwrap();
        let rps = 40.0;
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            FetchBudget {
                max_concurrent: 4,
                requests_per_second: rps,
                retries: 0,
            },
            None,
        );
        let names: Vec<String> = (0..12).map(|i| format!("pkg-{i}")).collect();
        let started = Instant::now();
        let results = client.fetch_many(&names);
        let elapsed = started.elapsed().as_secs_f64();
        assert_eq!(results.len(), 12);
        assert!(results.iter().all(|(_, r)| r.is_ok()));
        let observed_rate = 12.0 / elapsed.max(1e-9);
        assert!(
            observed_rate <= rps * 1.25,
            "observed {observed_rate} req/s exceeds budget {rps}"
        );
    }

    #[test]
    fn scoped_names_get_escaped_cache_files() {
        let server = StubServer::start(|_| (200, registry_doc("@scope/pkg")));
        let dir = tempfile::tempdir().unwrap();
        let client = RegistryClient::with_endpoints(
            &server.addr,
            &server.addr,
            CachePolicy::refresh(dir.path()),
            fast_budget(),
            None,
        );
        client.fetch_package("@scope/pkg").unwrap();
        assert!(dir.path().join("@scope%2Fpkg.json").exists());
    }

    // ── stakeholder history ──

    fn pkg_with_author(name: &str, year: i32, author: Person) -> PackageMetadata {
        let mut pm = PackageMetadata::named(name);
        pm.created_time = Utc.with_ymd_and_hms(year, 1, 1, 0, 0, 0).unwrap();
        pm.authors.push(author);
        pm
    }

    #[test]
    fn history_counts_packages_and_earliest_first_seen() {
        let ada = Person::with_email("Ada", "ada@example.com");
        let corpus = vec![
            pkg_with_author("p1", 2021, ada.clone()),
            pkg_with_author("p2", 2020, ada.clone()),
            pkg_with_author("p3", 2022, ada.clone()),
        ];
        let history = build_stakeholder_history(&corpus);
        let record = &history[&ada.identity()];
        assert_eq!(record.contributed_package_count, 3);
        assert_eq!(
            record.first_seen,
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
        );
    }

    #[test]
    fn history_single_package_single_author() {
        let corpus = vec![pkg_with_author("only", 2023, Person::named("Solo"))];
        let history = build_stakeholder_history(&corpus);
        assert_eq!(history.len(), 1);
        assert_eq!(
            history[&Person::named("Solo").identity()].contributed_package_count,
            1
        );
    }

    #[test]
    fn history_merges_case_variants() {
        let corpus = vec![
            pkg_with_author("p1", 2021, Person::with_email("Ada", "Ada@Example.com")),
            pkg_with_author("p2", 2022, Person::with_email("ada", "ada@example.com")),
        ];
        let history = build_stakeholder_history(&corpus);
        assert_eq!(history.len(), 1);
        assert_eq!(
            history.values().next().unwrap().contributed_package_count,
            2
        );
    }

    #[test]
    fn history_cpn_matches_brute_force_on_random_toys() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(77, "history-oracle", 0);
        for _case in 0..25 {
            let n_packages = rng.random_range(1..=20usize);
            let n_people = rng.random_range(1..=6usize);
            let people: Vec<Person> = (0..n_people)
                .map(|i| Person::with_email(&format!("p{i}"), &format!("p{i}@x.y")))
                .collect();
            let mut corpus = Vec::new();
            for pkg in 0..n_packages {
                let mut pm = PackageMetadata::named(&format!("pkg{pkg}"));
                pm.created_time = Utc
                    .with_ymd_and_hms(2000 + rng.random_range(0..20), 1, 1, 0, 0, 0)
                    .unwrap();
                for person in &people {
                    if rng.random_bool(0.4) {
                        let role = StakeholderRole::ALL[rng.random_range(0..4)];
                        match role {
                            StakeholderRole::Author => pm.authors.push(person.clone()),
                            StakeholderRole::Maintainer => pm.maintainers.push(person.clone()),
                            StakeholderRole::Contributor => pm.contributors.push(person.clone()),
                            StakeholderRole::Publisher => pm.publishers.push(person.clone()),
                        }
                    }
                }
                corpus.push(pm);
            }
            let history = build_stakeholder_history(&corpus);
            for person in &people {
                let brute: BTreeSet<&str> = corpus
                    .iter()
                    .filter(|pm| {
                        StakeholderRole::ALL
                            .iter()
                            .any(|&r| pm.stakeholders(r).contains(person))
                    })
                    .map(|pm| pm.package_name.as_str())
                    .collect();
                let cpn = history
                    .get(&person.identity())
                    .map(|r| r.contributed_package_count)
                    .unwrap_or(0);
                assert_eq!(cpn, brute.len() as u64, "CPN mismatch for {person:?}");
            }
        }
    }

    // ── fixture corpora ──

    #[test]
    fn fixture_corpus_roundtrip_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut lines = String::new();
        for i in 0..10 {
            let label = i % 2;
            lines.push_str(&format!(
                r#"{{"package":{{"name":"pkg{i}"}},"label":{label}}}"#
            ));
            lines.push('\n');
        }
        std::fs::write(&path, lines).unwrap();
        let corpus = load_fixture_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 10);
        assert_eq!(corpus.iter().filter(|r| r.label == 1).count(), 5);
        assert_eq!(corpus[3].metadata.package_name, "pkg3");

        let mut buf = Vec::new();
        write_corpus_jsonl(&corpus, &mut buf).unwrap();
        let reparsed = {
            let path2 = dir.path().join("again.jsonl");
            std::fs::write(&path2, &buf).unwrap();
            load_fixture_corpus(&path2).unwrap()
        };
        assert_eq!(corpus, reparsed);
    }

    #[test]
    fn bad_label_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            "{\"package\":{\"name\":\"a\"},\"label\":0}\n{\"package\":{\"name\":\"b\"},\"label\":2}\n",
        )
        .unwrap();
        match load_fixture_corpus(&path).unwrap_err() {
            IngestError::BadLabel { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_fixture_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "{\"package\":{\"name\":\"a\"},\"label\":0}\nnot json\n").unwrap();
        match load_fixture_corpus(&path).unwrap_err() {
            IngestError::BadLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
