//! Program execution through out-of-process runner shims.
//!
//! A shim is any executable that speaks the line protocol below on its
//! standard input/output. The harness owns the clock: a request that does
//! not answer within the timeout gets its shim killed and respawned, and the
//! outcome is recorded as [`Status::Timeout`].
//!
//! ```text
//! -> {"id":"..","source":"..","entry_point":"..","args":[<canonical>..],"timeout_ms":60000}
//! <- {"id":"..","status":"ok","value":<canonical>,"diagnostic":""}
//! ```

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::value::{decode_json_with, encode_args, values_equal, DecodeLimits, FloatPolicy, Value};

/// Maximum length of an outcome diagnostic, in bytes.
pub const MAX_DIAGNOSTIC_BYTES: usize = 2048;

/// Language tag of placeholder programs that stand in for failed extractions.
/// They are never sent to a shim and always raise.
pub const SENTINEL_LANGUAGE: &str = "sentinel";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("shim for language {language:?} unavailable: {reason}")]
    ShimUnavailable { language: String, reason: String },
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("invalid runner configuration: {0}")]
    Config(String),
    #[error("outcome cache {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub program_id: String,
    pub source_text: String,
    pub entry_point: String,
    pub language_tag: String,
}

impl Program {
    pub fn new(
        program_id: impl Into<String>,
        source_text: impl Into<String>,
        entry_point: impl Into<String>,
        language_tag: impl Into<String>,
    ) -> Result<Self, RunnerError> {
        let p = Program {
            program_id: program_id.into(),
            source_text: source_text.into(),
            entry_point: entry_point.into(),
            language_tag: language_tag.into(),
        };
        p.validate()?;
        Ok(p)
    }

    /// An always-raising placeholder for a candidate slot that produced no code.
    pub fn sentinel(program_id: impl Into<String>, entry_point: impl Into<String>, reason: &str) -> Self {
        Program {
            program_id: program_id.into(),
            source_text: format!("no candidate extracted: {reason}"),
            entry_point: entry_point.into(),
            language_tag: SENTINEL_LANGUAGE.into(),
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.language_tag == SENTINEL_LANGUAGE
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.source_text.trim().is_empty() {
            return Err(RunnerError::InvalidProgram(format!("{}: empty source", self.program_id)));
        }
        if !is_identifier(&self.entry_point) {
            return Err(RunnerError::InvalidProgram(format!(
                "{}: entry point {:?} is not an identifier",
                self.program_id, self.entry_point
            )));
        }
        Ok(())
    }

    /// Content hash of everything that determines behaviour.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.language_tag, &self.entry_point, &self.source_text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex_prefix(&h.finalize(), 16)
    }
}

pub(crate) fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes.iter().take(n).map(|b| format!("{b:02x}")).collect()
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Exception,
    Timeout,
    DecodeError,
}

/// Result of one execution. Carries a value exactly when the status is ok.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OutcomeRepr", into = "OutcomeRepr")]
pub struct Outcome {
    status: Status,
    value: Option<Value>,
    diagnostic: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct OutcomeRepr {
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

impl TryFrom<OutcomeRepr> for Outcome {
    type Error = String;

    fn try_from(r: OutcomeRepr) -> Result<Self, String> {
        match (r.status, r.value) {
            (Status::Ok, Some(v)) => Ok(Outcome::ok(v).with_diagnostic(r.diagnostic)),
            (Status::Ok, None) => Err("ok outcome without value".into()),
            (_, Some(_)) => Err("abnormal outcome with value".into()),
            (s, None) => Ok(Outcome::abnormal(s, r.diagnostic.unwrap_or_default())),
        }
    }
}

impl From<Outcome> for OutcomeRepr {
    fn from(o: Outcome) -> Self {
        OutcomeRepr {
            status: o.status,
            value: o.value,
            diagnostic: o.diagnostic,
        }
    }
}

impl Outcome {
    pub fn ok(value: Value) -> Self {
        Outcome {
            status: Status::Ok,
            value: Some(value),
            diagnostic: None,
        }
    }

    /// An abnormal outcome. `status` must not be [`Status::Ok`].
    pub fn abnormal(status: Status, diagnostic: impl Into<String>) -> Self {
        assert_ne!(status, Status::Ok, "abnormal outcome needs an abnormal status");
        let d = diagnostic.into();
        Outcome {
            status,
            value: None,
            diagnostic: (!d.is_empty()).then(|| truncate_diagnostic(&d)),
        }
    }

    pub fn exception(diagnostic: impl Into<String>) -> Self {
        Outcome::abnormal(Status::Exception, diagnostic)
    }

    fn with_diagnostic(mut self, d: Option<String>) -> Self {
        self.diagnostic = d.filter(|d| !d.is_empty()).map(|d| truncate_diagnostic(&d));
        self
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn value(&self) -> Option<&Value> {
        self.value.as_ref()
    }

    pub fn diagnostic(&self) -> Option<&str> {
        self.diagnostic.as_deref()
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

/// Keeps the last [`MAX_DIAGNOSTIC_BYTES`] bytes, cut at a char boundary.
pub fn truncate_diagnostic(s: &str) -> String {
    if s.len() <= MAX_DIAGNOSTIC_BYTES {
        return s.to_owned();
    }
    let mut start = s.len() - MAX_DIAGNOSTIC_BYTES;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    s[start..].to_owned()
}

/// Two outcomes agree when both are ok with equal values, or both are
/// abnormal with the same status.
pub fn outcomes_equal(a: &Outcome, b: &Outcome, policy: &FloatPolicy) -> bool {
    match (a.value(), b.value()) {
        (Some(x), Some(y)) => values_equal(x, y, policy),
        (None, None) => a.status == b.status,
        _ => false,
    }
}

/// Anything that can evaluate a program on an argument list.
pub trait Executor: Send + Sync {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError>;
}

impl<E: Executor + ?Sized> Executor for Arc<E> {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError> {
        (**self).execute(program, args)
    }
}

impl<E: Executor + ?Sized> Executor for &E {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError> {
        (**self).execute(program, args)
    }
}

// ---------------------------------------------------------------------------
// wire protocol

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShimRequest {
    pub id: String,
    pub source: String,
    pub entry_point: String,
    pub args: Vec<Value>,
    pub timeout_ms: u64,
}

/// Response as sent by a shim; the value is kept raw so that decode
/// failures become a [`Status::DecodeError`] outcome rather than a protocol
/// failure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShimResponse {
    pub id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Json>,
    #[serde(default)]
    pub diagnostic: String,
}

impl ShimResponse {
    pub fn from_outcome(id: impl Into<String>, outcome: &Outcome) -> Self {
        let status = match outcome.status() {
            Status::Ok => "ok",
            Status::Exception => "exception",
            Status::Timeout => "timeout",
            Status::DecodeError => "decode_error",
        };
        ShimResponse {
            id: id.into(),
            status: status.into(),
            value: outcome.value().map(Value::to_json),
            diagnostic: outcome.diagnostic().unwrap_or_default().to_owned(),
        }
    }

    /// Classifies the response into an outcome.
    pub fn into_outcome(self, limits: DecodeLimits) -> Outcome {
        let diag = self.diagnostic;
        match self.status.as_str() {
            "ok" => match self.value {
                None => Outcome::abnormal(Status::DecodeError, "ok response without value"),
                Some(json) => match decode_json_with(&json, limits) {
                    Ok(v) => Outcome::ok(v).with_diagnostic(Some(diag)),
                    Err(e) => Outcome::abnormal(Status::DecodeError, e.to_string()),
                },
            },
            "exception" => Outcome::abnormal(Status::Exception, diag),
            "decode_error" => Outcome::abnormal(Status::DecodeError, diag),
            "timeout" => Outcome::abnormal(Status::Timeout, diag),
            other => Outcome::abnormal(Status::DecodeError, format!("unknown status {other:?}")),
        }
    }
}

// ---------------------------------------------------------------------------
// process pool

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunnerConfig {
    pub timeout_seconds: f64,
    pub shim_command: String,
    pub max_concurrent_executions: usize,
    #[serde(default = "default_int_digits")]
    pub max_int_digits: usize,
}

fn default_int_digits() -> usize {
    crate::value::DEFAULT_MAX_INT_DIGITS
}

impl RunnerConfig {
    pub fn new(shim_command: impl Into<String>) -> Self {
        RunnerConfig {
            timeout_seconds: 60.0,
            shim_command: shim_command.into(),
            max_concurrent_executions: 4,
            max_int_digits: default_int_digits(),
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if !(self.timeout_seconds.is_finite() && self.timeout_seconds > 0.0) {
            return Err(RunnerError::Config(format!("timeout_seconds must be > 0, got {}", self.timeout_seconds)));
        }
        if self.max_concurrent_executions == 0 {
            return Err(RunnerError::Config("max_concurrent_executions must be positive".into()));
        }
        if self.shim_command.split_whitespace().next().is_none() {
            return Err(RunnerError::Config("empty shim command".into()));
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_seconds)
    }
}

struct ShimProcess {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    lines: Receiver<io::Result<String>>,
    stderr_tail: Arc<Mutex<VecDeque<u8>>>,
}

impl ShimProcess {
    fn spawn(command: &str) -> io::Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| io::Error::other("empty shim command"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let tail = Arc::clone(&stderr_tail);
        thread::spawn(move || {
            let mut stderr = stderr;
            let mut buf = [0u8; 4096];
            while let Ok(n) = stderr.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut t = tail.lock().unwrap_or_else(|e| e.into_inner());
                t.extend(&buf[..n]);
                let excess = t.len().saturating_sub(MAX_DIAGNOSTIC_BYTES);
                t.drain(..excess);
            }
        });
        Ok(ShimProcess {
            child,
            stdin,
            lines,
            stderr_tail,
        })
    }

    fn stderr_tail(&self) -> String {
        let t = self.stderr_tail.lock().unwrap_or_else(|e| e.into_inner());
        let bytes: Vec<u8> = t.iter().copied().collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn is_alive(&mut self) -> bool {
        matches!(self.child.try_wait(), Ok(None))
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

enum Exchange {
    Answered(String),
    TimedOut,
    Died,
}

/// Pool of shim processes for one language.
pub struct ShimPool {
    language: String,
    cfg: RunnerConfig,
    idle: Mutex<Vec<ShimProcess>>,
    live: Mutex<usize>,
    freed: Condvar,
    next_request: AtomicU64,
    spawned: AtomicU64,
}

/// Releases a pool slot when an execution finishes, however it finishes.
struct Slot<'a>(&'a ShimPool);

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        let mut live = self.0.live.lock().unwrap_or_else(|e| e.into_inner());
        *live -= 1;
        self.0.freed.notify_one();
    }
}

impl ShimPool {
    pub fn new(language: impl Into<String>, cfg: RunnerConfig) -> Result<Self, RunnerError> {
        cfg.validate()?;
        Ok(ShimPool {
            language: language.into(),
            cfg,
            idle: Mutex::new(Vec::new()),
            live: Mutex::new(0),
            freed: Condvar::new(),
            next_request: AtomicU64::new(0),
            spawned: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RunnerConfig {
        &self.cfg
    }

    /// Number of shim processes started so far (including respawns).
    pub fn spawn_count(&self) -> u64 {
        self.spawned.load(Ordering::Relaxed)
    }

    fn acquire(&self) -> Slot<'_> {
        let mut live = self.live.lock().unwrap_or_else(|e| e.into_inner());
        while *live >= self.cfg.max_concurrent_executions {
            live = self.freed.wait(live).unwrap_or_else(|e| e.into_inner());
        }
        *live += 1;
        Slot(self)
    }

    fn checkout(&self) -> Result<ShimProcess, RunnerError> {
        loop {
            let candidate = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
            match candidate {
                Some(mut p) => {
                    if p.is_alive() {
                        return Ok(p);
                    }
                    p.kill();
                }
                None => break,
            }
        }
        self.spawned.fetch_add(1, Ordering::Relaxed);
        ShimProcess::spawn(&self.cfg.shim_command).map_err(|e| RunnerError::ShimUnavailable {
            language: self.language.clone(),
            reason: format!("{}: {e}", self.cfg.shim_command),
        })
    }

    fn checkin(&self, p: ShimProcess) {
        self.idle.lock().unwrap_or_else(|e| e.into_inner()).push(p);
    }

    fn exchange(&self, proc: &mut ShimProcess, line: &str) -> Exchange {
        let written = writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush());
        if written.is_err() {
            return Exchange::Died;
        }
        match proc.lines.recv_timeout(self.cfg.timeout()) {
            Ok(Ok(resp)) => Exchange::Answered(resp),
            Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => Exchange::Died,
            Err(RecvTimeoutError::Timeout) => Exchange::TimedOut,
        }
    }
}

impl Executor for ShimPool {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError> {
        if program.is_sentinel() {
            return Ok(Outcome::exception(program.source_text.clone()));
        }
        let _slot = self.acquire();
        let mut proc = self.checkout()?;
        let id = format!(
            "{}#{}",
            program.program_id,
            self.next_request.fetch_add(1, Ordering::Relaxed)
        );
        let request = ShimRequest {
            id: id.clone(),
            source: program.source_text.clone(),
            entry_point: program.entry_point.clone(),
            args: args.to_vec(),
            timeout_ms: (self.cfg.timeout_seconds * 1000.0).ceil() as u64,
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        let limits = DecodeLimits {
            max_int_digits: self.cfg.max_int_digits,
        };
        match self.exchange(&mut proc, &line) {
            Exchange::Answered(resp) => match serde_json::from_str::<ShimResponse>(&resp) {
                Ok(r) if r.id == id => {
                    let outcome = r.into_outcome(limits);
                    self.checkin(proc);
                    Ok(outcome)
                }
                Ok(r) => {
                    proc.kill();
                    Ok(Outcome::abnormal(
                        Status::DecodeError,
                        format!("response id {:?} does not match request {id:?}", r.id),
                    ))
                }
                Err(e) => {
                    proc.kill();
                    Ok(Outcome::abnormal(Status::DecodeError, format!("malformed shim response: {e}")))
                }
            },
            Exchange::TimedOut => {
                let tail = proc.stderr_tail();
                proc.kill();
                Ok(Outcome::abnormal(
                    Status::Timeout,
                    format!("exceeded {}s; stderr tail: {tail}", self.cfg.timeout_seconds),
                ))
            }
            Exchange::Died => {
                // give the stderr reader a moment to drain what the shim said last
                thread::sleep(Duration::from_millis(20));
                let tail = proc.stderr_tail();
                proc.kill();
                Ok(Outcome::exception(format!("shim terminated during request; stderr tail: {tail}")))
            }
        }
    }
}

impl Drop for ShimPool {
    fn drop(&mut self) {
        let idle = std::mem::take(self.idle.get_mut().unwrap_or_else(|e| e.into_inner()));
        for p in idle {
            p.kill();
        }
    }
}

/// Routes programs to the pool registered for their language tag.
#[derive(Default)]
pub struct Runner {
    pools: BTreeMap<String, ShimPool>,
}

impl Runner {
    pub fn new() -> Self {
        Runner::default()
    }

    pub fn with_language(mut self, language: &str, cfg: RunnerConfig) -> Result<Self, RunnerError> {
        self.pools.insert(language.to_owned(), ShimPool::new(language, cfg)?);
        Ok(self)
    }

    pub fn pool(&self, language: &str) -> Option<&ShimPool> {
        self.pools.get(language)
    }
}

impl Executor for Runner {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError> {
        if program.is_sentinel() {
            return Ok(Outcome::exception(program.source_text.clone()));
        }
        match self.pools.get(&program.language_tag) {
            Some(pool) => pool.execute(program, args),
            None => Err(RunnerError::ShimUnavailable {
                language: program.language_tag.clone(),
                reason: "no shim registered for this language".into(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// caching

/// Cache key of one execution.
pub fn execution_key(program: &Program, args: &[Value]) -> String {
    format!("{}@{}:{}", program.program_id, program.fingerprint(), encode_args(args))
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    outcome: Outcome,
}

type CacheCell = Arc<Mutex<Option<Outcome>>>;

/// Memoizes an executor: each (program, args) pair is run at most once.
///
/// With a backing file, completed outcomes are appended as JSON lines and
/// reloaded on open, so warm re-runs never touch a shim.
pub struct CachedExecutor<E> {
    inner: E,
    cells: Mutex<HashMap<String, CacheCell>>,
    log: Option<(PathBuf, Mutex<BufWriter<File>>)>,
    misses: AtomicU64,
}

impl<E: Executor> CachedExecutor<E> {
    pub fn in_memory(inner: E) -> Self {
        CachedExecutor {
            inner,
            cells: Mutex::new(HashMap::new()),
            log: None,
            misses: AtomicU64::new(0),
        }
    }

    pub fn persistent(inner: E, path: &Path) -> Result<Self, RunnerError> {
        let cache_err = |source| RunnerError::Cache {
            path: path.display().to_string(),
            source,
        };
        let mut cells = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(path).map_err(cache_err)?;
            for line in text.lines() {
                // a torn final line from an interrupted run is skipped
                if let Ok(entry) = serde_json::from_str::<CacheLine>(line) {
                    cells.insert(entry.key, Arc::new(Mutex::new(Some(entry.outcome))));
                }
            }
        } else if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(cache_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(cache_err)?;
        Ok(CachedExecutor {
            inner,
            cells: Mutex::new(cells),
            log: Some((path.to_owned(), Mutex::new(BufWriter::new(file)))),
            misses: AtomicU64::new(0),
        })
    }

    /// Number of executions delegated to the inner executor.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.cells.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn flush(&self) -> Result<(), RunnerError> {
        if let Some((path, w)) = &self.log {
            w.lock()
                .unwrap_or_else(|e| e.into_inner())
                .flush()
                .map_err(|source| RunnerError::Cache {
                    path: path.display().to_string(),
                    source,
                })?;
        }
        Ok(())
    }
}

impl<E: Executor> Executor for CachedExecutor<E> {
    fn execute(&self, program: &Program, args: &[Value]) -> Result<Outcome, RunnerError> {
        let key = execution_key(program, args);
        let cell = {
            let mut cells = self.cells.lock().unwrap_or_else(|e| e.into_inner());
            Arc::clone(cells.entry(key.clone()).or_default())
        };
        let mut slot = cell.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(o) = slot.as_ref() {
            return Ok(o.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let outcome = self.inner.execute(program, args)?;
        if let Some((path, w)) = &self.log {
            let line = serde_json::to_string(&CacheLine {
                key,
                outcome: outcome.clone(),
            })
            .expect("outcome serializes");
            let mut w = w.lock().unwrap_or_else(|e| e.into_inner());
            writeln!(w, "{line}").map_err(|source| RunnerError::Cache {
                path: path.display().to_string(),
                source,
            })?;
        }
        *slot = Some(outcome.clone());
        Ok(outcome)
    }
}

impl<E> Drop for CachedExecutor<E> {
    fn drop(&mut self) {
        if let Some((_, w)) = &self.log {
            let _ = w.lock().unwrap_or_else(|e| e.into_inner()).flush();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_equality_rules() {
        let p = FloatPolicy::default();
        let ok3 = Outcome::ok(Value::int(3));
        assert!(outcomes_equal(&ok3, &Outcome::ok(Value::int(3)), &p));
        assert!(!outcomes_equal(
            &Outcome::abnormal(Status::Timeout, ""),
            &Outcome::exception("boom"),
            &p
        ));
        assert!(!outcomes_equal(&ok3, &Outcome::exception("boom"), &p));
        assert!(outcomes_equal(&Outcome::exception("a"), &Outcome::exception("b"), &p));
    }

    #[test]
    fn outcome_serde_enforces_invariant() {
        let o = Outcome::ok(Value::int(1));
        let text = serde_json::to_string(&o).unwrap();
        assert_eq!(text, r#"{"status":"ok","value":{"t":"int","v":"1"}}"#);
        assert_eq!(serde_json::from_str::<Outcome>(&text).unwrap(), o);
        assert!(serde_json::from_str::<Outcome>(r#"{"status":"ok"}"#).is_err());
        assert!(serde_json::from_str::<Outcome>(r#"{"status":"timeout","value":{"t":"none"}}"#).is_err());
    }

    #[test]
    fn diagnostics_are_truncated_to_tail() {
        let long = format!("{}é{}", "x".repeat(3000), "end");
        let o = Outcome::exception(long);
        let d = o.diagnostic().unwrap();
        assert!(d.len() <= MAX_DIAGNOSTIC_BYTES);
        assert!(d.ends_with("end"));
    }

    #[test]
    fn response_classification() {
        let limits = DecodeLimits::default();
        let r = |status: &str, value: Option<Json>| ShimResponse {
            id: "1".into(),
            status: status.into(),
            value,
            diagnostic: "d".into(),
        };
        assert_eq!(
            r("ok", Some(Value::int(2).to_json())).into_outcome(limits),
            Outcome::ok(Value::int(2)).with_diagnostic(Some("d".into()))
        );
        assert_eq!(r("ok", None).into_outcome(limits).status(), Status::DecodeError);
        let bad = serde_json::json!({"t": "int", "v": "1x"});
        assert_eq!(r("ok", Some(bad)).into_outcome(limits).status(), Status::DecodeError);
        assert_eq!(r("exception", None).into_outcome(limits).status(), Status::Exception);
        assert_eq!(r("weird", None).into_outcome(limits).status(), Status::DecodeError);
        let huge = serde_json::json!({"t": "int", "v": "1".repeat(50)});
        let capped = DecodeLimits { max_int_digits: 10 };
        assert_eq!(r("ok", Some(huge)).into_outcome(capped).status(), Status::DecodeError);
    }

    #[test]
    fn program_validation() {
        assert!(Program::new("p", "", "f", "python").is_err());
        assert!(Program::new("p", "x", "1f", "python").is_err());
        assert!(Program::new("p", "x", "f_1", "python").is_ok());
        let a = Program::new("p", "x", "f", "python").unwrap();
        let b = Program::new("q", "x", "f", "python").unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), Program::new("p", "y", "f", "python").unwrap().fingerprint());
    }

    #[test]
    fn sentinel_never_reaches_a_shim() {
        let runner = Runner::new();
        let s = Program::sentinel("s", "f", "no code block");
        assert_eq!(runner.execute(&s, &[]).unwrap().status(), Status::Exception);
        let p = Program::new("p", "x", "f", "cobol").unwrap();
        assert!(matches!(runner.execute(&p, &[]), Err(RunnerError::ShimUnavailable { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunnerConfig::new("shim");
        assert!(cfg.validate().is_ok());
        cfg.timeout_seconds = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = RunnerConfig::new("  ");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_shim_binary_is_infrastructure_error() {
        let pool = ShimPool::new("x", RunnerConfig::new("/nonexistent/shim-binary")).unwrap();
        let p = Program::new("p", "x", "f", "x").unwrap();
        assert!(matches!(pool.execute(&p, &[]), Err(RunnerError::ShimUnavailable { .. })));
    }
}
