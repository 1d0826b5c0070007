//! Candidate acquisition and the fixed-budget empirical coder.
//!
//! For every task, `m` candidates are fetched once from a completion provider
//! (or loaded from disk), persisted, and then sampled uniformly. Slots whose
//! response holds no usable definition are refetched a bounded number of
//! times and otherwise filled with an always-raising sentinel, so `m` never
//! shrinks.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::runner::{hex_prefix, Program, SENTINEL_LANGUAGE};
use crate::task::Task;

pub const PROMPT_TEMPLATE_VERSION: &str = "v1";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("unexpected provider response: {0}")]
    MalformedResponse(String),
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ProviderError> },
}

impl ProviderError {
    fn is_transient(&self) -> bool {
        match self {
            ProviderError::RateLimited | ProviderError::Transport(_) => true,
            ProviderError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no code block defining {entry_point:?} in response")]
pub struct ExtractionError {
    pub entry_point: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("candidate store {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("candidate store {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8000,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

fn default_temperature() -> f64 {
    0.6
}

fn default_parallel() -> usize {
    8
}

fn default_language() -> String {
    "python".into()
}

fn default_request_timeout() -> f64 {
    120.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub api_key_env_var: String,
    #[serde(default = "default_parallel")]
    pub max_parallel_requests: usize,
    #[serde(default)]
    pub retry_policy: RetryPolicy,
    /// Language of the generated candidates; selects the runner shim.
    #[serde(default = "default_language")]
    pub language_tag: String,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_seconds: f64,
}

impl ProviderConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>, api_key_env_var: impl Into<String>) -> Self {
        ProviderConfig {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            api_key_env_var: api_key_env_var.into(),
            max_parallel_requests: default_parallel(),
            retry_policy: RetryPolicy::default(),
            language_tag: default_language(),
            request_timeout_seconds: default_request_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_parallel_requests == 0 {
            return Err(ProviderError::Config("max_parallel_requests must be positive".into()));
        }
        if self.request_timeout_seconds.is_nan() || self.request_timeout_seconds <= 0.0 {
            return Err(ProviderError::Config("request_timeout_seconds must be positive".into()));
        }
        Ok(())
    }
}

/// Source of completions for a prompt.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

/// Chat-completion endpoint over HTTP with a bearer token.
pub struct HttpProvider {
    cfg: ProviderConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let api_key =
            std::env::var(&cfg.api_key_env_var).map_err(|_| ProviderError::MissingApiKey(cfg.api_key_env_var.clone()))?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_seconds)))
            .build()
            .into();
        Ok(HttpProvider { cfg, api_key, agent })
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint_url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            429 => return Err(ProviderError::RateLimited),
            _ => {
                return Err(ProviderError::Http {
                    status,
                    body: text.chars().take(512).collect(),
                })
            }
        }
        let json: Json = serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        assistant_text(&json).ok_or_else(|| ProviderError::MalformedResponse("no assistant message in response".into()))
    }
}

/// Pulls the assistant text out of the common chat-completion response shapes.
pub fn assistant_text(json: &Json) -> Option<String> {
    if let Some(s) = json.pointer("/choices/0/message/content").and_then(Json::as_str) {
        return Some(s.to_owned());
    }
    if let Some(s) = json.pointer("/message/content").and_then(Json::as_str) {
        return Some(s.to_owned());
    }
    let parts = json.get("content")?.as_array()?;
    let text: Vec<&str> = parts.iter().filter_map(|p| p.get("text").and_then(Json::as_str)).collect();
    (!text.is_empty()).then(|| text.join(""))
}

/// The versioned prompt for a task.
pub fn build_prompt(task: &Task) -> String {
    format!(
        "{}\n\nImplement exactly one function with this signature:\n{}\n\nReturn only code.",
        task.description.trim_end(),
        task.signature.render()
    )
}

fn defines(code: &str, entry_point: &str, language: &str) -> bool {
    match language {
        "python" => code.contains(&format!("def {entry_point}(")),
        crate::toy::LANGUAGE => code
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .is_some_and(|l| l == format!("fn {entry_point}")),
        _ => !code.trim().is_empty(),
    }
}

/// Returns the first fenced code block that defines `entry_point`, or the
/// whole response when it has no fences but defines it directly.
pub fn extract_code(response: &str, entry_point: &str, language: &str) -> Result<String, ExtractionError> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(body) => blocks.push(body.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(body) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some(code) = blocks.into_iter().find(|b| defines(b, entry_point, language)) {
        return Ok(code);
    }
    if !response.contains("```") && defines(response, entry_point, language) {
        return Ok(response.trim().to_owned());
    }
    Err(ExtractionError {
        entry_point: entry_point.to_owned(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Provenance {
    Fetched {
        model_name: String,
        temperature: f64,
        fetched_at: String,
    },
    Loaded {
        loaded_from: PathBuf,
    },
}

/// The `m` candidates of one task; uniform sampling over them is the
/// empirical coder.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub task_id: String,
    pub candidates: Vec<Program>,
    pub provenance: Provenance,
    /// Per-slot extraction failure notes (`None` for clean slots).
    pub extraction_errors: Vec<Option<String>>,
}

impl CandidateSet {
    pub fn new(task_id: impl Into<String>, candidates: Vec<Program>, provenance: Provenance) -> Self {
        let n = candidates.len();
        CandidateSet {
            task_id: task_id.into(),
            candidates,
            provenance,
            extraction_errors: vec![None; n],
        }
    }

    pub fn m(&self) -> usize {
        self.candidates.len()
    }

    /// The first `m` candidates.
    pub fn prefix(&self, m: usize) -> CandidateSet {
        let m = m.min(self.m());
        CandidateSet {
            task_id: self.task_id.clone(),
            candidates: self.candidates[..m].to_vec(),
            provenance: self.provenance.clone(),
            extraction_errors: self.extraction_errors[..m].to_vec(),
        }
    }

    pub fn validate(&self, entry_point: &str) -> Result<(), String> {
        if self.candidates.is_empty() {
            return Err(format!("task {}: candidate set is empty", self.task_id));
        }
        if let Some(p) = self.candidates.iter().find(|p| p.entry_point != entry_point) {
            return Err(format!(
                "task {}: candidate {} has entry point {:?}, expected {entry_point:?}",
                self.task_id, p.program_id, p.entry_point
            ));
        }
        Ok(())
    }
}

/// Draws a candidate index uniformly from `0..m`.
pub fn uniform_index<R: Rng + ?Sized>(m: usize, rng: &mut R) -> usize {
    assert!(m > 0, "cannot pick from an empty candidate set");
    rng.random_range(0..m)
}

pub fn uniform_pick<'a, R: Rng + ?Sized>(cs: &'a CandidateSet, rng: &mut R) -> &'a Program {
    &cs.candidates[uniform_index(cs.m(), rng)]
}

pub fn candidate_id(namespace: &str, task_id: &str, k: usize) -> String {
    format!("{namespace}:{task_id}:cand_{k}")
}

struct SlotResult {
    program: Program,
    extraction_error: Option<String>,
}

enum Attempt {
    Done(SlotResult),
    Deferred,
}

#[allow(clippy::too_many_arguments)]
fn fetch_slot(
    task: &Task,
    cfg: &ProviderConfig,
    provider: &dyn CompletionProvider,
    prompt: &str,
    namespace: &str,
    k: usize,
    defer_on_rate_limit: bool,
    requests: &AtomicUsize,
) -> Result<Attempt, ProviderError> {
    let entry = &task.signature.name;
    let id = candidate_id(namespace, &task.task_id, k);
    let policy = &cfg.retry_policy;
    let mut transient_failures = 0u32;
    let mut extraction_failures = 0u32;
    loop {
        requests.fetch_add(1, Ordering::Relaxed);
        match provider.complete(prompt) {
            Ok(text) => match extract_code(&text, entry, &cfg.language_tag) {
                Ok(code) => {
                    let program = Program::new(id, code, entry.clone(), cfg.language_tag.clone())
                        .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
                    return Ok(Attempt::Done(SlotResult {
                        program,
                        extraction_error: None,
                    }));
                }
                Err(e) => {
                    extraction_failures += 1;
                    if extraction_failures > policy.max_retries {
                        let note = format!("{e} after {extraction_failures} responses");
                        log::warn!("{id}: {note}; using sentinel");
                        return Ok(Attempt::Done(SlotResult {
                            program: Program::sentinel(id, entry.clone(), &note),
                            extraction_error: Some(note),
                        }));
                    }
                }
            },
            Err(ProviderError::RateLimited) if defer_on_rate_limit => return Ok(Attempt::Deferred),
            Err(e) if e.is_transient() => {
                if transient_failures >= policy.max_retries {
                    return Err(ProviderError::Exhausted {
                        attempts: transient_failures + 1,
                        last: Box::new(e),
                    });
                }
                thread::sleep(policy.backoff(transient_failures));
                transient_failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Fetches candidates for slots `first..first + count` (1-based indices),
/// naming them under `namespace`.
///
/// Slots run in parallel up to `max_parallel_requests`; once the provider
/// rate-limits, the remaining slots are fetched one at a time with backoff.
pub fn fetch_range(
    task: &Task,
    first: usize,
    count: usize,
    cfg: &ProviderConfig,
    provider: &dyn CompletionProvider,
    namespace: &str,
) -> Result<(Vec<Program>, Vec<Option<String>>), ProviderError> {
    cfg.validate()?;
    let prompt = build_prompt(task);
    let requests = AtomicUsize::new(0);
    let throttled = AtomicBool::new(false);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SlotResult>>> = Mutex::new((0..count).map(|_| None).collect());
    let deferred: Mutex<Vec<usize>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<ProviderError>> = Mutex::new(None);

    let workers = cfg.max_parallel_requests.min(count).max(1);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count || failure.lock().unwrap().is_some() {
                    break;
                }
                if throttled.load(Ordering::Relaxed) {
                    deferred.lock().unwrap().push(i);
                    continue;
                }
                match fetch_slot(task, cfg, provider, &prompt, namespace, first + i, true, &requests) {
                    Ok(Attempt::Done(r)) => results.lock().unwrap()[i] = Some(r),
                    Ok(Attempt::Deferred) => {
                        throttled.store(true, Ordering::Relaxed);
                        deferred.lock().unwrap().push(i);
                    }
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut deferred = deferred.into_inner().unwrap();
    deferred.sort_unstable();
    let mut results = results.into_inner().unwrap();
    for i in deferred {
        match fetch_slot(task, cfg, provider, &prompt, namespace, first + i, false, &requests)? {
            Attempt::Done(r) => results[i] = Some(r),
            Attempt::Deferred => unreachable!("sequential fetch does not defer"),
        }
    }
    log::info!(
        "{} {}: {} completion requests for {count} candidates",
        cfg.model_name,
        task.task_id,
        requests.load(Ordering::Relaxed)
    );
    let (programs, notes) = results
        .into_iter()
        .map(|r| {
            let r = r.expect("every slot resolved");
            (r.program, r.extraction_error)
        })
        .unzip();
    Ok((programs, notes))
}

/// Fetches `m` fresh candidates for `task`.
pub fn fetch_candidates(
    task: &Task,
    m: usize,
    cfg: &ProviderConfig,
    provider: &dyn CompletionProvider,
) -> Result<CandidateSet, ProviderError> {
    if m == 0 {
        return Err(ProviderError::Config("m must be at least 1".into()));
    }
    let (candidates, extraction_errors) = fetch_range(task, 1, m, cfg, provider, &cfg.model_name)?;
    Ok(CandidateSet {
        task_id: task.task_id.clone(),
        candidates,
        provenance: Provenance::Fetched {
            model_name: cfg.model_name.clone(),
            temperature: cfg.temperature,
            fetched_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        },
        extraction_errors,
    })
}

// ---------------------------------------------------------------------------
// on-disk store: <root>/<task>/manifest.json + cand_<k>.src

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    task_id: String,
    prompt_template_version: String,
    provenance: Provenance,
    candidates: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    program_id: String,
    entry_point: String,
    language_tag: String,
    sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extraction_error: Option<String>,
}

/// Escapes a task id into a single safe path component.
pub fn path_component(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' if !(out.is_empty() && b == b'.') => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn sha256_hex(text: &str) -> String {
    hex_prefix(&Sha256::digest(text.as_bytes()), 32)
}

pub struct CandidateStore {
    root: PathBuf,
}

impl CandidateStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CandidateStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn task_dir(&self, task_id: &str) -> PathBuf {
        self.root.join(path_component(task_id))
    }

    pub fn contains(&self, task_id: &str) -> bool {
        self.task_dir(task_id).join("manifest.json").is_file()
    }

    pub fn save(&self, set: &CandidateSet) -> Result<(), StoreError> {
        let dir = self.task_dir(&set.task_id);
        let io = |path: &Path, e: std::io::Error| StoreError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        };
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        let mut entries = Vec::with_capacity(set.m());
        for (i, p) in set.candidates.iter().enumerate() {
            let file = format!("cand_{}.src", i + 1);
            let path = dir.join(&file);
            fs::write(&path, &p.source_text).map_err(|e| io(&path, e))?;
            entries.push(ManifestEntry {
                file,
                program_id: p.program_id.clone(),
                entry_point: p.entry_point.clone(),
                language_tag: p.language_tag.clone(),
                sha256: sha256_hex(&p.source_text),
                extraction_error: set.extraction_errors.get(i).cloned().flatten(),
            });
        }
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            task_id: set.task_id.clone(),
            prompt_template_version: PROMPT_TEMPLATE_VERSION.into(),
            provenance: set.provenance.clone(),
            candidates: entries,
        };
        let path = dir.join("manifest.json");
        let tmp = dir.join("manifest.json.tmp");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&tmp, text).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))
    }

    pub fn load(&self, task_id: &str) -> Result<CandidateSet, StoreError> {
        let dir = self.task_dir(task_id);
        let path = dir.join("manifest.json");
        let corrupt = |reason: String| StoreError::Corrupt {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(&path).map_err(|e| StoreError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if manifest.task_id != task_id {
            return Err(corrupt(format!("manifest is for task {:?}", manifest.task_id)));
        }
        let mut candidates = Vec::with_capacity(manifest.candidates.len());
        let mut notes = Vec::with_capacity(manifest.candidates.len());
        for e in manifest.candidates {
            let src_path = dir.join(&e.file);
            let source = fs::read_to_string(&src_path).map_err(|err| StoreError::Io {
                path: src_path.display().to_string(),
                reason: err.to_string(),
            })?;
            if sha256_hex(&source) != e.sha256 {
                return Err(corrupt(format!("{} does not match its recorded hash", e.file)));
            }
            let program = if e.language_tag == SENTINEL_LANGUAGE {
                Program {
                    program_id: e.program_id,
                    source_text: source,
                    entry_point: e.entry_point,
                    language_tag: e.language_tag,
                }
            } else {
                Program::new(e.program_id, source, e.entry_point, e.language_tag).map_err(|err| corrupt(err.to_string()))?
            };
            candidates.push(program);
            notes.push(e.extraction_error);
        }
        Ok(CandidateSet {
            task_id: manifest.task_id,
            candidates,
            provenance: manifest.provenance,
            extraction_errors: notes,
        })
    }

    /// Adopts hand-written candidates from `dir` (every `*.src` file, in
    /// name order) as the candidate set of `task`.
    pub fn import_dir(&self, task: &Task, dir: &Path, language_tag: &str, namespace: &str) -> Result<CandidateSet, StoreError> {
        let io = |e: std::io::Error| StoreError::Io {
            path: dir.display().to_string(),
            reason: e.to_string(),
        };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "src"))
            .collect();
        files.sort();
        let mut candidates = Vec::new();
        for (i, f) in files.iter().enumerate() {
            let source = fs::read_to_string(f).map_err(io)?;
            let p = Program::new(
                candidate_id(namespace, &task.task_id, i + 1),
                source,
                task.signature.name.clone(),
                language_tag,
            )
            .map_err(|e| StoreError::Corrupt {
                path: f.display().to_string(),
                reason: e.to_string(),
            })?;
            candidates.push(p);
        }
        let set = CandidateSet::new(
            task.task_id.clone(),
            candidates,
            Provenance::Loaded {
                loaded_from: dir.to_owned(),
            },
        );
        self.save(&set)?;
        Ok(set)
    }
}
