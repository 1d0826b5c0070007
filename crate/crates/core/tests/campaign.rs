mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use common::bench::{self, adopt, config, env};
use incoherence::campaign::{
    ablate, emit_ablation, emit_report, fetch_all, prepare_inputs, run_campaign, substream, Axis, CampaignEnv,
    CampaignReport, Format, ModelEntry, ModelsFile, SUMMARY_COLUMNS,
};
use incoherence::coderstore::{CompletionProvider, ProviderConfig, ProviderError, RetryPolicy};
use incoherence::runner::{outcomes_equal, Executor, Runner};
use incoherence::value::decode_args;
use incoherence::FloatPolicy;
use rand::RngCore;

fn replay(report: &CampaignReport, cfg: &incoherence::campaign::CampaignConfig, label: &str) {
    let runner = Runner::new().with_language("toy", common::toy_config(10.0)).unwrap();
    for u in report.units.iter().filter(|u| u.model == label) {
        let Some(w) = &u.incoherence_witness else { continue };
        let set = cfg.store(&bench::entry(label)).load(&u.task_id).unwrap();
        let find = |id: &str| set.candidates.iter().find(|p| p.program_id == id).unwrap().clone();
        let args = decode_args(&w.input).unwrap();
        let a = runner.execute(&find(&w.first), &args).unwrap();
        let b = runner.execute(&find(&w.second), &args).unwrap();
        assert!(!outcomes_equal(&a, &b, &FloatPolicy::default()), "{w:?}");
    }
}

#[test]
fn oracle_less_campaign_produces_flags_and_rankings() {
    let dir = common::tmp();
    let cfg = config(dir.path(), false, &["good", "bad"]);
    adopt(&cfg, "good", 4);
    adopt(&cfg, "bad", 4);
    let start = Instant::now();
    let report = run_campaign(&cfg, &env()).unwrap();
    assert!(start.elapsed().as_secs() < 120);
    assert_eq!(report.units.len(), 6);
    assert!(report.exclusions.is_empty(), "{:?}", report.exclusions);
    for u in &report.units {
        assert_eq!(u.stats.n, 300);
        assert_eq!(u.stats.m, 4);
        assert!(u.empirical_error.is_none() && u.error_witness.is_none() && u.first_candidate_failures.is_none());
        assert_eq!(u.detected, u.stats.incoherence_mismatches > 0);
        assert_eq!(u.detected, u.incoherence_witness.is_some());
    }
    let unit = |m: &str, t: &str| report.units.iter().find(|u| u.model == m && u.task_id == t).unwrap();
    assert!(!unit("good", "mod7").detected);
    assert!(!unit("good", "double").detected);
    assert!(unit("good", "abs").detected);
    assert!(unit("bad", "mod7").detected);
    for b in &report.models {
        assert!(b.mean_error.is_none() && b.pass_at_1.is_none() && b.detection_rate.is_none());
        assert!(b.mean_incoherence.is_some());
    }
    let ranking = report.ranking.as_ref().unwrap();
    assert_eq!(ranking.models, vec!["good", "bad"]);
    assert_eq!(ranking.rank_by_incoherence_tasks, vec![2.0, 1.0]);
    assert!(ranking.rank_by_error_tasks.is_none() && ranking.spearman_rho.is_none());
    replay(&report, &cfg, "bad");

    emit_report(&report, &cfg.output_dir, &[Format::Csv, Format::Json]).unwrap();
    let mut rd = csv::Reader::from_path(cfg.output_dir.join("summary.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), SUMMARY_COLUMNS.to_vec());
    for row in rd.records() {
        let row = row.unwrap();
        assert_eq!(&row[1], "");
        assert!(!row[2].is_empty());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary[0]["mean_error"].is_null());
    assert!(summary[0]["mean_incoherence"].is_number());
    assert!(cfg.output_dir.join("ranking_pairs.csv").exists());
}

#[test]
fn campaign_with_ground_truth_fills_error_columns() {
    let dir = common::tmp();
    let cfg = config(dir.path(), true, &["good", "bad"]);
    adopt(&cfg, "good", 4);
    adopt(&cfg, "bad", 4);
    let report = run_campaign(&cfg, &env()).unwrap();
    assert_eq!(report.units.len(), 6);
    for u in &report.units {
        assert!(u.empirical_error.is_some() && u.first_candidate_failures.is_some());
        // a disagreement needs at least one wrong candidate on that input
        if u.detected {
            assert!(u.stats.error_mismatches.unwrap() > 0 || u.first_candidate_failures.unwrap() > 0);
        }
    }
    let good = &report.models[0];
    let bad = &report.models[1];
    assert_eq!(good.pass_at_1, Some(1.0));
    assert!(bad.pass_at_1.unwrap() < 1.0);
    assert!(good.mean_error.unwrap() < bad.mean_error.unwrap());
    // recount detection rate from the units
    for b in &report.models {
        let units: Vec<_> = report.units.iter().filter(|u| u.model == b.model).collect();
        let erroneous: Vec<_> = units.iter().filter(|u| u.stats.error_mismatches.unwrap() > 0).collect();
        let want = (!erroneous.is_empty())
            .then(|| erroneous.iter().filter(|u| u.detected).count() as f64 / erroneous.len() as f64);
        assert_eq!(b.detection_rate, want);
    }
    assert!(report.ranking.as_ref().unwrap().spearman_rho.is_some());
    assert!(report.config.shared_input_stream);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = common::tmp();
    let cfg = config(dir.path(), true, &["good", "bad"]);
    adopt(&cfg, "good", 4);
    adopt(&cfg, "bad", 4);
    let first = run_campaign(&cfg, &env()).unwrap().to_json();
    let warm = run_campaign(&cfg, &env()).unwrap().to_json();
    assert_eq!(first, warm);
    // a cold cache with the same seed reproduces the report as well
    let other = common::tmp();
    let cold_cfg = config(other.path(), true, &["good", "bad"]);
    adopt(&cold_cfg, "good", 4);
    adopt(&cold_cfg, "bad", 4);
    assert_eq!(run_campaign(&cold_cfg, &env()).unwrap().to_json(), first);
}

#[test]
fn input_streams_are_prefix_stable() {
    let dir = common::tmp();
    let mut cfg = config(dir.path(), true, &["good"]);
    let runner = Runner::new().with_language("toy", common::toy_config(10.0)).unwrap();
    let task = &cfg.benchmark.tasks[0].clone();
    cfg.n = 50;
    let short = prepare_inputs(&cfg, &runner, task).unwrap();
    cfg.n = 120;
    let long = prepare_inputs(&cfg, &runner, task).unwrap();
    assert_eq!(long.len(), 120);
    assert_eq!(&long[..50], &short[..]);
    cfg.n = 80;
    assert_eq!(prepare_inputs(&cfg, &runner, task).unwrap(), long[..80].to_vec());
}

#[test]
fn inputs_where_the_ground_truth_raises_are_skipped() {
    let dir = common::tmp();
    let mut cfg = config(dir.path(), true, &["good"]);
    let mut task = cfg.benchmark.tasks[0].clone();
    task.ground_truth = Some(common::toy("gt", "fn f\nif_lt 0 raise negative"));
    cfg.n = 100;
    let runner = Runner::new().with_language("toy", common::toy_config(10.0)).unwrap();
    let xs = prepare_inputs(&cfg, &runner, &task).unwrap();
    assert!(!xs.is_empty());
    assert!(xs.iter().all(|x| x[0].as_f64().unwrap() >= 0.0));
    task.ground_truth = Some(common::toy("gt", "fn f\nraise always"));
    assert!(prepare_inputs(&cfg, &runner, &task).is_err());
}

#[test]
fn missing_candidates_become_exclusions() {
    let dir = common::tmp();
    let cfg = config(dir.path(), true, &["good", "bad"]);
    adopt(&cfg, "good", 4);
    adopt(&cfg, "bad", 2);
    let report = run_campaign(&cfg, &env()).unwrap();
    assert_eq!(report.units.len(), 3);
    assert_eq!(report.exclusions.len(), 3);
    assert!(report.exclusions.iter().all(|e| e.model == "bad" && e.reason.contains("need 4")));
    assert_eq!(report.units.len() + report.exclusions.len(), 6);
    assert!(report.models[1].per_task.is_empty());
}

#[test]
fn ablation_over_m_and_n() {
    let dir = common::tmp();
    let cfg = config(dir.path(), true, &["bad"]);
    adopt(&cfg, "bad", 4);
    let env = env();
    let by_m = ablate(&cfg, &env, Axis::M, &[1.0, 2.0, 4.0]).unwrap();
    assert_eq!(by_m.rows.len(), 3);
    let m1 = &by_m.rows[0];
    assert_eq!(m1.value, 1.0);
    assert_eq!(m1.nonzero_incoherence_tasks, 0);
    assert_eq!(m1.mean_incoherence, Some(0.0));
    assert_eq!(m1.detection_rate, Some(0.0));
    assert!(by_m.rows[2].detection_rate.unwrap() > 0.0);
    let ablation_csv = emit_ablation(&by_m, &cfg.output_dir).unwrap();
    assert!(std::fs::read_to_string(ablation_csv).unwrap().starts_with("value,model,detection_rate"));

    let by_n = ablate(&cfg, &env, Axis::N, &[20.0, 200.0]).unwrap();
    let ids = |r: &CampaignReport| {
        r.units
            .iter()
            .filter_map(|u| u.incoherence_witness.as_ref().map(|w| w.first.clone()))
            .all(|id| id.starts_with("bad:"))
    };
    assert!(by_n.reports.iter().all(ids));
    assert_eq!(by_n.reports[0].config.n, 20);
    assert!(ablate(&cfg, &env, Axis::M, &[1.5]).is_err());
    assert!(ablate(&cfg, &env, Axis::M, &[]).is_err());
}

struct ToyProvider {
    calls: Arc<AtomicUsize>,
}

impl CompletionProvider for ToyProvider {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let i = self.calls.fetch_add(1, Ordering::SeqCst);
        assert!(prompt.contains("def f(x: int) -> int:"));
        // every fourth candidate is subtly wrong
        Ok(if i % 4 == 3 {
            "```\nfn f\nadd 1\n```".into()
        } else {
            "```\nfn f\nmul 2\n```".into()
        })
    }
}

#[test]
fn providers_fill_the_store_and_temperature_gets_its_own_namespace() {
    let dir = common::tmp();
    let mut cfg = config(dir.path(), false, &[]);
    let mut pc = ProviderConfig::new("http://unused", "toy-model", "UNUSED");
    pc.language_tag = "toy".into();
    pc.retry_policy = RetryPolicy {
        max_retries: 1,
        initial_backoff_ms: 1,
        max_backoff_ms: 1,
    };
    cfg.models = vec![ModelEntry {
        label: "remote".into(),
        provider: Some(pc),
    }];
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let runner = Runner::new().with_language("toy", common::toy_config(10.0)).unwrap();
    let env = CampaignEnv {
        executor: Arc::new(runner),
        providers: Box::new(move |_| Ok(Box::new(ToyProvider { calls: c.clone() }))),
    };
    assert!(fetch_all(&cfg, &env).unwrap().is_empty());
    assert_eq!(calls.load(Ordering::SeqCst), 12);
    // stored candidates are reused
    let report = run_campaign(&cfg, &env).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 12);
    assert_eq!(report.units.len(), 3);
    // growing m only fetches the difference
    cfg.m = 6;
    fetch_all(&cfg, &env).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 18);
    let set = cfg.store(&cfg.models[0]).load("abs").unwrap();
    assert_eq!(set.m(), 6);
    assert_eq!(set.candidates[5].program_id, "remote:abs:cand_6");

    cfg.temperature = Some(0.2);
    assert_ne!(cfg.namespace(&cfg.models[0]), "remote");
    assert!(!cfg.store(&cfg.models[0]).contains("abs"));
    fetch_all(&cfg, &env).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 36);
}

#[test]
fn models_file_and_config_validation() {
    let dir = common::tmp();
    let path = dir.path().join("models.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "models": [{"label": "a"}, {"label": "b", "provider": {"endpoint_url": "http://x", "model_name": "b", "api_key_env_var": "K"}}]}"#,
    )
    .unwrap();
    let models = ModelsFile::load(&path).unwrap();
    assert_eq!(models.len(), 2);
    assert_eq!(models[1].provider.as_ref().unwrap().temperature, 0.6);
    std::fs::write(&path, r#"{"schema_version": 9, "models": []}"#).unwrap();
    assert!(ModelsFile::load(&path).is_err());

    let mut cfg = config(dir.path(), false, &["a", "a"]);
    assert!(cfg.validate().is_err());
    cfg.models.pop();
    assert!(cfg.validate().is_ok());
    cfg.m = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn substreams_are_independent_by_name() {
    let a = substream(1, "m", "t", "fuzz").next_u64();
    assert_eq!(a, substream(1, "m", "t", "fuzz").next_u64());
    assert_ne!(a, substream(2, "m", "t", "fuzz").next_u64());
    assert_ne!(a, substream(1, "m", "t", "detect").next_u64());
    // length prefixes keep concatenations apart
    assert_ne!(substream(1, "ab", "c", "s").next_u64(), substream(1, "a", "bc", "s").next_u64());
}
