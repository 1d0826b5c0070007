//! End-to-end campaigns: candidates, inputs, execution, estimation and
//! aggregation for every (model, task) pair, plus ablations and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coderstore::{CandidateSet, CandidateStore, CompletionProvider, ProviderConfig, ProviderError, Provenance};
use crate::estimators::{
    detect_incoherence, empirical_error, empirical_incoherence, ExecSemantics, InfrastructureError, PacParams,
    Semantics, TaskStats, UniformCoder, UniformGen,
};
use crate::inputgen::{read_inputs, write_inputs, FuzzStream, GenConfig};
use crate::metrics::{
    descending_ranks, correlation_label, ranking_agreement, spearman_rho, BenchmarkStats, ModelCounts,
    RankingAgreement, SingleProgramResult,
};
use crate::runner::{hex_prefix, CachedExecutor, Executor, Program};
use crate::task::{Benchmark, Task};
use crate::value::{encode_args, FloatPolicy, InputTuple};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MODELS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Store(#[from] crate::coderstore::StoreError),
}

fn io_err(path: &Path, e: impl ToString) -> CampaignError {
    CampaignError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// A coder under evaluation. Without a provider its candidates must already
/// be in the store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    #[serde(default)]
    pub provider: Option<ProviderConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelsFile {
    pub schema_version: u32,
    pub models: Vec<ModelEntry>,
}

impl ModelsFile {
    pub fn load(path: &Path) -> Result<Vec<ModelEntry>, CampaignError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let f: ModelsFile = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        if f.schema_version != MODELS_SCHEMA_VERSION {
            return Err(CampaignError::Config(format!(
                "{}: unsupported schema_version {}",
                path.display(),
                f.schema_version
            )));
        }
        Ok(f.models)
    }
}

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    pub benchmark: Benchmark,
    pub models: Vec<ModelEntry>,
    pub m: usize,
    pub n: usize,
    /// Overrides every provider's temperature; candidates are then stored
    /// under a temperature-qualified name.
    pub temperature: Option<f64>,
    pub pac: PacParams,
    pub float_policy: FloatPolicy,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub workers: usize,
    /// Fuzzer limits; `n` is taken from the campaign.
    pub gen: GenConfig,
}

impl CampaignConfig {
    pub fn new(benchmark: Benchmark, models: Vec<ModelEntry>, output_dir: PathBuf, cache_dir: PathBuf) -> Self {
        CampaignConfig {
            benchmark,
            models,
            m: 10,
            n: 1000,
            temperature: None,
            pac: PacParams::default(),
            float_policy: FloatPolicy::default(),
            rng_seed: 0,
            output_dir,
            cache_dir,
            workers: 4,
            gen: GenConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let err = |s: &str| Err(CampaignError::Config(s.into()));
        if self.m == 0 {
            return err("m must be at least 1");
        }
        if self.n == 0 {
            return err("n must be at least 1");
        }
        if self.workers == 0 {
            return err("workers must be at least 1");
        }
        if self.models.is_empty() {
            return err("no models configured");
        }
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return err("temperature must lie in [0, 2]");
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if m.label.is_empty() || !seen.insert(&m.label) {
                return Err(CampaignError::Config(format!("model label {:?} is empty or repeated", m.label)));
            }
        }
        self.benchmark
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        self.float_policy
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        self.gen_config().validate().map_err(|e| CampaignError::Config(e.to_string()))
    }

    fn gen_config(&self) -> GenConfig {
        GenConfig {
            n: self.n,
            ..self.gen.clone()
        }
    }

    /// Store namespace of a model under this configuration.
    pub fn namespace(&self, model: &ModelEntry) -> String {
        match self.temperature {
            Some(t) => format!("{}@t{t:?}", model.label),
            None => model.label.clone(),
        }
    }

    pub fn store(&self, model: &ModelEntry) -> CandidateStore {
        let ns = crate::coderstore::path_component(&self.namespace(model));
        CandidateStore::new(self.cache_dir.join("candidates").join(ns))
    }
}

/// Builds a completion provider for a model.
pub type ProviderFactory = dyn Fn(&ProviderConfig) -> Result<Box<dyn CompletionProvider>, ProviderError> + Send + Sync;

/// Everything a campaign needs from the outside world.
pub struct CampaignEnv {
    pub executor: Arc<dyn Executor>,
    pub providers: Box<ProviderFactory>,
}

impl CampaignEnv {
    /// Real HTTP providers.
    pub fn new(executor: Arc<dyn Executor>) -> Self {
        CampaignEnv {
            executor,
            providers: Box::new(|cfg| Ok(Box::new(crate::coderstore::HttpProvider::new(cfg.clone())?))),
        }
    }
}

/// Deterministic RNG for one (model, task, stage) triple.
pub fn substream(seed: u64, model: &str, task_id: &str, stage: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [model, task_id, stage] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

// ---------------------------------------------------------------------------
// stages

/// Loads at least `cfg.m` candidates for `task`, fetching the missing ones
/// when the model has a provider. Returns exactly `cfg.m`.
pub fn ensure_candidates(
    cfg: &CampaignConfig,
    env: &CampaignEnv,
    model: &ModelEntry,
    task: &Task,
) -> Result<CandidateSet, CampaignError> {
    let store = cfg.store(model);
    let stored = if store.contains(&task.task_id) {
        Some(store.load(&task.task_id)?)
    } else {
        None
    };
    let have = stored.as_ref().map_or(0, |s| s.m());
    if have >= cfg.m {
        return Ok(stored.expect("nonempty store").prefix(cfg.m));
    }
    let Some(provider_cfg) = &model.provider else {
        return Err(CampaignError::Config(format!(
            "model {}: {have} stored candidates for task {}, need {}, and no provider is configured",
            model.label, task.task_id, cfg.m
        )));
    };
    let mut provider_cfg = provider_cfg.clone();
    if let Some(t) = cfg.temperature {
        provider_cfg.temperature = t;
    }
    let provider = (env.providers)(&provider_cfg)?;
    let (mut programs, mut notes) = crate::coderstore::fetch_range(
        task,
        have + 1,
        cfg.m - have,
        &provider_cfg,
        &*provider,
        &cfg.namespace(model),
    )?;
    let set = match stored {
        Some(mut s) => {
            s.candidates.append(&mut programs);
            s.extraction_errors.append(&mut notes);
            s
        }
        None => CandidateSet {
            task_id: task.task_id.clone(),
            candidates: programs,
            provenance: Provenance::Fetched {
                model_name: provider_cfg.model_name.clone(),
                temperature: provider_cfg.temperature,
                fetched_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            },
            extraction_errors: notes,
        },
    };
    store.save(&set)?;
    Ok(set.prefix(cfg.m))
}

fn inputs_path(cfg: &CampaignConfig, task: &Task) -> PathBuf {
    let limits = GenConfig {
        n: 1,
        rng_seed: 0,
        ..cfg.gen.clone()
    };
    let key = format!(
        "{}|{}|{}",
        cfg.rng_seed,
        serde_json::to_string(&limits).expect("config serializes"),
        task.ground_truth.as_ref().map_or(String::new(), |g| g.fingerprint())
    );
    let tag = hex_prefix(&Sha256::digest(key.as_bytes()), 8);
    cfg.cache_dir
        .join("inputs")
        .join(crate::coderstore::path_component(&task.task_id))
        .join(format!("{tag}.jsonl"))
}

/// The first `cfg.n` inputs of the task's fuzz stream, skipping inputs on
/// which the ground truth does not return normally. The stream does not
/// depend on `n`, so a smaller `n` reads a prefix of a cached larger run.
pub fn prepare_inputs(cfg: &CampaignConfig, executor: &dyn Executor, task: &Task) -> Result<Vec<InputTuple>, String> {
    let path = inputs_path(cfg, task);
    if path.exists() {
        let cached = read_inputs(&path).map_err(|e| e.to_string())?;
        if cached.len() >= cfg.n {
            return Ok(cached[..cfg.n].to_vec());
        }
    }
    let gen = cfg.gen_config();
    let corpus = task.corpus().map_err(|e| e.to_string())?;
    let stream = FuzzStream::new(&corpus, &gen, substream(cfg.rng_seed, "", &task.task_id, "fuzz"));
    let inputs: Vec<InputTuple> = match &task.ground_truth {
        None => stream.take(cfg.n).collect(),
        Some(gt) => {
            let budget = cfg.n.saturating_mul(10);
            let mut kept = Vec::with_capacity(cfg.n);
            for x in stream.take(budget) {
                if executor.execute(gt, &x).map_err(|e| e.to_string())?.is_ok() {
                    kept.push(x);
                    if kept.len() == cfg.n {
                        break;
                    }
                }
            }
            if kept.is_empty() {
                return Err("ground truth aborts on every generated input".into());
            }
            if kept.len() < cfg.n {
                log::warn!(
                    "task {}: only {} of {budget} generated inputs are valid for the ground truth",
                    task.task_id,
                    kept.len()
                );
            }
            kept
        }
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    }
    write_inputs(&path, &inputs).map_err(|e| e.to_string())?;
    Ok(inputs)
}

// ---------------------------------------------------------------------------
// report types

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub first: String,
    pub second: String,
    pub input: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub model: String,
    pub task_id: String,
    pub stats: TaskStats,
    pub empirical_error: Option<f64>,
    pub empirical_incoherence: f64,
    pub detected: bool,
    /// Verdict of the PAC detection procedure over the same candidates and inputs.
    pub pac_detected: bool,
    pub pac_trials: u64,
    pub incoherence_witness: Option<WitnessRecord>,
    pub error_witness: Option<WitnessRecord>,
    /// Inputs on which the first candidate differs from the ground truth.
    pub first_candidate_failures: Option<u64>,
    pub sentinel_candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub model: String,
    pub task_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRanking {
    pub models: Vec<String>,
    pub rank_by_mean_error: Vec<f64>,
    pub rank_by_mean_incoherence: Vec<f64>,
    pub spearman_rho: Option<f64>,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub m: usize,
    pub n: usize,
    pub temperature: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub rng_seed: u64,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Every model and both empirical measures of a task see the same inputs.
    pub shared_input_stream: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub benchmark_id: String,
    pub config: ReportConfig,
    pub units: Vec<UnitReport>,
    pub models: Vec<BenchmarkStats>,
    /// Count of tasks with nonzero error vs nonzero incoherence; this is the
    /// ranking the agreement label refers to.
    pub ranking: Option<RankingAgreement>,
    pub mean_ranking: Option<MeanRanking>,
    pub exclusions: Vec<Exclusion>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn witness_record(w: &crate::estimators::Witness<Program, InputTuple>) -> WitnessRecord {
    WitnessRecord {
        first: w.first.program_id.clone(),
        second: w.second.program_id.clone(),
        input: encode_args(&w.input),
    }
}

fn measure_unit<S: Semantics<Program, InputTuple, Out = crate::runner::Outcome>>(
    cfg: &CampaignConfig,
    model: &str,
    task: &Task,
    cs: &CandidateSet,
    inputs: &[InputTuple],
    sem: &S,
) -> Result<UnitReport, InfrastructureError> {
    let inc = empirical_incoherence(
        &cs.candidates,
        inputs,
        sem,
        &mut substream(cfg.rng_seed, model, &task.task_id, "incoherence"),
    )?;
    let err = match &task.ground_truth {
        Some(gt) => Some(empirical_error(
            &cs.candidates,
            gt,
            inputs,
            sem,
            &mut substream(cfg.rng_seed, model, &task.task_id, "error"),
        )?),
        None => None,
    };
    let first_failures = match &task.ground_truth {
        Some(gt) => {
            let mut k = 0;
            for x in inputs {
                let reference = sem.run(gt, x)?;
                sem.check_reference(x, &reference)?;
                if !sem.same(&sem.run(&cs.candidates[0], x)?, &reference) {
                    k += 1;
                }
            }
            Some(k)
        }
        None => None,
    };
    let det = detect_incoherence(
        &UniformCoder {
            candidates: &cs.candidates,
        },
        &UniformGen { inputs },
        sem,
        &cfg.pac,
        &mut substream(cfg.rng_seed, model, &task.task_id, "detect"),
    )?;
    let stats = TaskStats {
        task_id: task.task_id.clone(),
        m: cs.m() as u64,
        n: inputs.len() as u64,
        error_mismatches: err.as_ref().map(|e| e.mismatches),
        incoherence_mismatches: inc.mismatches,
    };
    Ok(UnitReport {
        model: model.to_owned(),
        task_id: task.task_id.clone(),
        empirical_error: stats.empirical_error::<f64>(),
        empirical_incoherence: stats.empirical_incoherence::<f64>(),
        detected: stats.detected(),
        pac_detected: det.detected(),
        pac_trials: det.trials_used,
        incoherence_witness: inc.witness.as_ref().map(witness_record),
        error_witness: err.as_ref().and_then(|e| e.witness.as_ref()).map(witness_record),
        first_candidate_failures: first_failures,
        sentinel_candidates: cs.candidates.iter().filter(|p| p.is_sentinel()).count(),
        stats,
    })
}

fn mean_ranking(models: &[BenchmarkStats]) -> Option<MeanRanking> {
    if models.len() < 2 {
        return None;
    }
    let errs: Option<Vec<f64>> = models.iter().map(|b| b.mean_error).collect();
    let incs: Option<Vec<f64>> = models.iter().map(|b| b.mean_incoherence).collect();
    let incs = incs?;
    let rank_inc = descending_ranks(&incs);
    let rank_err = errs.as_deref().map(descending_ranks).unwrap_or_default();
    let rho = if rank_err.is_empty() {
        None
    } else {
        spearman_rho(&rank_err, &rank_inc).ok()
    };
    Some(MeanRanking {
        models: models.iter().map(|b| b.model.clone()).collect(),
        rank_by_mean_error: rank_err,
        rank_by_mean_incoherence: rank_inc,
        spearman_rho: rho,
        label: rho.and_then(|r| correlation_label(r).ok()).map(|l| format!("{l} correlation")),
    })
}

/// Runs every (model, task) unit and aggregates the results.
///
/// Units that hit an infrastructure failure are excluded from aggregates and
/// listed with the reason.
pub fn run_campaign(cfg: &CampaignConfig, env: &CampaignEnv) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let exec_path = cfg.cache_dir.join("executions.jsonl");
    let cached = CachedExecutor::persistent(Arc::clone(&env.executor), &exec_path)
        .map_err(|e| io_err(&exec_path, e))?;
    let sem = ExecSemantics {
        executor: &cached,
        policy: cfg.float_policy,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CampaignError::Config(e.to_string()))?;
    let tasks = &cfg.benchmark.tasks;

    let inputs: Vec<Result<Vec<InputTuple>, String>> =
        pool.install(|| tasks.par_iter().map(|t| prepare_inputs(cfg, &cached, t)).collect());

    let mut units = Vec::new();
    let mut exclusions = Vec::new();
    let mut models = Vec::new();
    let mut counts = Vec::new();
    for model in &cfg.models {
        let mut sets = Vec::with_capacity(tasks.len());
        for t in tasks {
            sets.push(ensure_candidates(cfg, env, model, t).map_err(|e| e.to_string()));
        }
        let results: Vec<Result<UnitReport, String>> = pool.install(|| {
            tasks
                .par_iter()
                .zip(&sets)
                .zip(&inputs)
                .map(|((t, cs), xs)| {
                    let cs = cs.as_ref().map_err(Clone::clone)?;
                    let xs = xs.as_ref().map_err(Clone::clone)?;
                    cs.validate(&t.signature.name)?;
                    measure_unit(cfg, &model.label, t, cs, xs, &sem).map_err(|e| e.to_string())
                })
                .collect()
        });
        let mut per_task = Vec::new();
        let mut single = Vec::new();
        for (t, r) in tasks.iter().zip(results) {
            match r {
                Ok(u) => {
                    per_task.push(u.stats.clone());
                    single.push(SingleProgramResult {
                        task_id: t.task_id.clone(),
                        failures: u.first_candidate_failures,
                    });
                    units.push(u);
                }
                Err(reason) => exclusions.push(Exclusion {
                    model: model.label.clone(),
                    task_id: t.task_id.clone(),
                    reason,
                }),
            }
        }
        let stats = BenchmarkStats::compute(cfg.benchmark.benchmark_id.clone(), model.label.clone(), per_task, &single);
        counts.push(ModelCounts {
            model: model.label.clone(),
            nonzero_error_tasks: stats.nonzero_error_tasks,
            nonzero_incoherence_tasks: stats.nonzero_incoherence_tasks,
        });
        models.push(stats);
    }
    cached.flush().map_err(|e| io_err(&exec_path, e))?;
    log::info!("{} executions delegated to shims", cached.misses());

    Ok(CampaignReport {
        schema_version: REPORT_SCHEMA_VERSION,
        benchmark_id: cfg.benchmark.benchmark_id.clone(),
        config: ReportConfig {
            m: cfg.m,
            n: cfg.n,
            temperature: cfg.temperature,
            epsilon: cfg.pac.epsilon(),
            delta: cfg.pac.delta(),
            rng_seed: cfg.rng_seed,
            relative_tolerance: cfg.float_policy.relative_tolerance,
            absolute_tolerance: cfg.float_policy.absolute_tolerance,
            shared_input_stream: true,
        },
        units,
        ranking: ranking_agreement(&counts).ok(),
        mean_ranking: mean_ranking(&models),
        models,
        exclusions,
    })
}

/// Fetches (or tops up) candidates for every model and task without measuring.
pub fn fetch_all(cfg: &CampaignConfig, env: &CampaignEnv) -> Result<Vec<Exclusion>, CampaignError> {
    cfg.validate()?;
    let mut failures = Vec::new();
    for model in &cfg.models {
        for t in &cfg.benchmark.tasks {
            if let Err(e) = ensure_candidates(cfg, env, model, t) {
                failures.push(Exclusion {
                    model: model.label.clone(),
                    task_id: t.task_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(failures)
}

// ---------------------------------------------------------------------------
// ablation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    M,
    N,
    Temperature,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "m" => Ok(Axis::M),
            "n" => Ok(Axis::N),
            "temperature" | "t" => Ok(Axis::Temperature),
            _ => Err(format!("unknown ablation axis {s:?} (expected m, n or temperature)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: f64,
    pub model: String,
    pub detection_rate: Option<f64>,
    pub mean_error: Option<f64>,
    pub mean_incoherence: Option<f64>,
    pub nonzero_incoherence_tasks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub axis: Axis,
    pub rows: Vec<AblationRow>,
    pub reports: Vec<CampaignReport>,
}

/// One campaign per value of `axis`, all other settings fixed.
pub fn ablate(cfg: &CampaignConfig, env: &CampaignEnv, axis: Axis, values: &[f64]) -> Result<Ablation, CampaignError> {
    if values.is_empty() {
        return Err(CampaignError::Config("no ablation values".into()));
    }
    let mut variants = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = cfg.clone();
        match axis {
            Axis::M | Axis::N => {
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(CampaignError::Config(format!("{axis:?} values must be positive integers, got {v}")));
                }
                if axis == Axis::M {
                    c.m = v as usize;
                } else {
                    c.n = v as usize;
                }
            }
            Axis::Temperature => c.temperature = Some(v),
        }
        variants.push(c);
    }
    // fetch the largest candidate set first so smaller m reuse its prefix
    if axis == Axis::M {
        let largest = variants.iter().max_by_key(|c| c.m).expect("nonempty");
        fetch_all(largest, env)?;
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (c, &v) in variants.iter().zip(values) {
        let r = run_campaign(c, env)?;
        for b in &r.models {
            rows.push(AblationRow {
                value: v,
                model: b.model.clone(),
                detection_rate: b.detection_rate,
                mean_error: b.mean_error,
                mean_incoherence: b.mean_incoherence,
                nonzero_incoherence_tasks: b.nonzero_incoherence_tasks,
            });
        }
        reports.push(r);
    }
    Ok(Ablation { axis, rows, reports })
}

// ---------------------------------------------------------------------------
// report files

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "model",
    "mean_error",
    "mean_incoherence",
    "spearman_rho",
    "detection_rate",
    "undetected_mean_error",
];

pub const RANKING_COLUMNS: [&str; 5] = [
    "model",
    "nonzero_error_tasks",
    "nonzero_incoherence_tasks",
    "rank_by_error_tasks",
    "rank_by_incoherence_tasks",
];

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CampaignError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let text = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn summary_rows(report: &CampaignReport) -> Vec<Vec<String>> {
    report
        .models
        .iter()
        .map(|b| {
            vec![
                b.model.clone(),
                cell(b.mean_error),
                cell(b.mean_incoherence),
                cell(b.spearman_rho_error_vs_incoherence),
                cell(b.detection_rate),
                cell(b.undetected_mean_error),
            ]
        })
        .collect()
}

fn ranking_rows(report: &CampaignReport) -> Vec<Vec<String>> {
    let ranking = report.ranking.as_ref();
    report
        .models
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                b.model.clone(),
                b.nonzero_error_tasks.map(|k| k.to_string()).unwrap_or_default(),
                b.nonzero_incoherence_tasks.to_string(),
                cell(ranking.and_then(|r| r.rank_by_error_tasks.as_ref()).map(|v| v[i])),
                cell(ranking.map(|r| r.rank_by_incoherence_tasks[i])),
            ]
        })
        .collect()
}

fn rows_as_json(header: &[&str], rows: &[Vec<String>]) -> Vec<BTreeMap<String, serde_json::Value>> {
    rows.iter()
        .map(|r| {
            header
                .iter()
                .zip(r)
                .map(|(h, v)| {
                    let json = if *h == "model" {
                        serde_json::Value::String(v.clone())
                    } else if v.is_empty() {
                        serde_json::Value::Null
                    } else {
                        serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()))
                    };
                    (h.to_string(), json)
                })
                .collect()
        })
        .collect()
}

/// Writes `report.json` and, per format, `summary.*` and `ranking_pairs.*`.
/// Returns the written paths in a fixed order.
pub fn emit_report(report: &CampaignReport, out: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, CampaignError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut written = Vec::new();
    let full = out.join("report.json");
    fs::write(&full, report.to_json()).map_err(|e| io_err(&full, e))?;
    written.push(full);
    let summary = summary_rows(report);
    let ranking = ranking_rows(report);
    for f in formats {
        match f {
            Format::Csv => {
                let p = out.join("summary.csv");
                write_csv(&p, &SUMMARY_COLUMNS, &summary)?;
                written.push(p);
                let p = out.join("ranking_pairs.csv");
                write_csv(&p, &RANKING_COLUMNS, &ranking)?;
                written.push(p);
            }
            Format::Json => {
                let p = out.join("summary.json");
                write_json(&p, &rows_as_json(&SUMMARY_COLUMNS, &summary))?;
                written.push(p);
                let p = out.join("ranking_pairs.json");
                write_json(&p, &rows_as_json(&RANKING_COLUMNS, &ranking))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

pub const ABLATION_COLUMNS: [&str; 6] = [
    "value",
    "model",
    "detection_rate",
    "mean_error",
    "mean_incoherence",
    "nonzero_incoherence_tasks",
];

/// Writes the detection-rate-versus-axis table as `ablation_<axis>.csv`.
pub fn emit_ablation(ablation: &Ablation, out: &Path) -> Result<PathBuf, CampaignError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let axis = match ablation.axis {
        Axis::M => "m",
        Axis::N => "n",
        Axis::Temperature => "temperature",
    };
    let rows: Vec<Vec<String>> = ablation
        .rows
        .iter()
        .map(|r| {
            vec![
                format!("{:?}", r.value),
                r.model.clone(),
                cell(r.detection_rate),
                cell(r.mean_error),
                cell(r.mean_incoherence),
                r.nonzero_incoherence_tasks.to_string(),
            ]
        })
        .collect();
    let p = out.join(format!("ablation_{axis}.csv"));
    write_csv(&p, &ABLATION_COLUMNS, &rows)?;
    Ok(p)
}
