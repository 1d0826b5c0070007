#![allow(dead_code)]

use std::path::PathBuf;

use incoherence::runner::RunnerConfig;
use incoherence::task::{Param, Signature};
use incoherence::value::{ValueMap, ValueSet};
use incoherence::{Program, Task, Value};
use proptest::prelude::*;

pub fn toy_shim() -> String {
    env!("CARGO_BIN_EXE_toy-shim").to_owned()
}

pub fn toy_config(timeout_seconds: f64) -> RunnerConfig {
    let mut cfg = RunnerConfig::new(toy_shim());
    cfg.timeout_seconds = timeout_seconds;
    cfg
}

pub fn toy(id: &str, source: &str) -> Program {
    let entry = source
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("fn "))
        .expect("toy source starts with `fn name`")
        .trim()
        .to_owned();
    Program::new(id, source, entry, "toy").unwrap()
}

pub fn int_task(id: &str, seeds: &[i64]) -> Task {
    Task {
        task_id: id.into(),
        description: format!("Task {id}."),
        signature: Signature {
            name: "f".into(),
            params: vec![Param {
                name: "x".into(),
                type_tag: "int".into(),
            }],
            return_type_tag: "int".into(),
        },
        seed_inputs: seeds.iter().map(|&s| vec![Value::int(s)]).collect(),
        ground_truth: None,
    }
}

pub fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

pub fn path_in(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn float_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>(),
        Just(f64::NAN),
        Just(f64::INFINITY),
        Just(f64::NEG_INFINITY),
        Just(-0.0),
        (-1e6f64..1e6),
    ]
}

pub fn hashable_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::None),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::int),
        "[0-9]{20,60}".prop_map(|s| Value::Int(s.parse().unwrap())),
        float_strategy().prop_map(Value::Float),
        "\\PC{0,8}".prop_map(Value::text),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| prop::collection::vec(inner, 0..3).prop_map(Value::Tuple))
}

/// Arbitrary well-formed values, nested up to a few levels.
pub fn value() -> impl Strategy<Value = Value> {
    let leaf = hashable_value();
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Tuple),
            prop::collection::vec(hashable_value(), 0..4).prop_map(|xs| Value::Set(ValueSet::new(xs).unwrap())),
            prop::collection::vec((hashable_value(), inner), 0..4)
                .prop_map(|kvs| Value::Map(ValueMap::from_entries_last_wins(kvs).unwrap())),
        ]
    })
}

/// Test-side enumerations that do not share code with the simulator. They
/// group outputs into classes of equal behaviour and use complements, a
/// different route to the same quantities.
pub mod oracle {
    use incoherence::simulator::{Instance, OutputTable};
    use incoherence::{Exact, Outcome};
    use num_traits::{One, Zero};

    fn key(o: &Outcome) -> String {
        match o.value() {
            Some(v) => format!("ok {}", v.encode()),
            None => format!("{:?}", o.status()),
        }
    }

    fn table_key(t: &OutputTable) -> Vec<String> {
        t.outputs.iter().map(key).collect()
    }

    /// `1 - Σ_class w_class²` over the given (key, weight) pairs.
    fn collision_complement<K: PartialEq>(items: Vec<(K, Exact)>) -> Exact {
        let mut classes: Vec<(K, Exact)> = Vec::new();
        for (k, w) in items {
            match classes.iter_mut().find(|c| c.0 == k) {
                Some(c) => c.1 = c.1.clone() + w,
                None => classes.push((k, w)),
            }
        }
        let total: Exact = classes.iter().fold(Exact::zero(), |acc, c| acc + c.1.clone());
        let same: Exact = classes.iter().fold(Exact::zero(), |acc, c| acc + c.1.clone() * c.1.clone());
        total.clone() * total - same
    }

    pub fn pointwise_error(inst: &Instance<Exact>) -> Exact {
        let mut sum = Exact::zero();
        for (x, px) in inst.gen.probabilities.iter().enumerate() {
            let want = key(&inst.ground_truth.outputs[x]);
            let wrong = inst
                .coder
                .programs
                .iter()
                .zip(&inst.coder.weights)
                .filter(|(p, _)| key(&p.outputs[x]) != want)
                .fold(Exact::zero(), |acc, (_, w)| acc + w.clone());
            sum += px.clone() * wrong;
        }
        sum
    }

    pub fn pointwise_incoherence(inst: &Instance<Exact>) -> Exact {
        let mut sum = Exact::zero();
        for (x, px) in inst.gen.probabilities.iter().enumerate() {
            let items = inst
                .coder
                .programs
                .iter()
                .zip(&inst.coder.weights)
                .map(|(p, w)| (key(&p.outputs[x]), w.clone()))
                .collect();
            sum += px.clone() * collision_complement(items);
        }
        sum
    }

    pub fn functional_error(inst: &Instance<Exact>) -> Exact {
        let want = table_key(&inst.ground_truth);
        let right = inst
            .coder
            .programs
            .iter()
            .zip(&inst.coder.weights)
            .filter(|(p, _)| table_key(p) == want)
            .fold(Exact::zero(), |acc, (_, w)| acc + w.clone());
        Exact::one() - right
    }

    pub fn functional_incoherence(inst: &Instance<Exact>) -> Exact {
        let items = inst
            .coder
            .programs
            .iter()
            .zip(&inst.coder.weights)
            .map(|(p, w)| (table_key(p), w.clone()))
            .collect();
        collision_complement(items)
    }

    /// Average ranks by counting: rank = #less + (#equal + 1) / 2.
    pub fn ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|a| {
                let less = x.iter().filter(|b| *b < a).count() as f64;
                let equal = x.iter().filter(|b| *b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
    }

    /// Smallest N with `2 exp(-2 N eps²) <= delta`, found by search.
    pub fn smallest_estimation_n(eps: f64, delta: f64) -> u64 {
        let mut n = 1u64;
        while 2.0 * (-2.0 * n as f64 * eps * eps).exp() > delta * (1.0 + 1e-12) {
            n += 1;
        }
        n
    }

    /// Smallest N with `(1 - eps)^N <= delta`, found by search.
    pub fn smallest_detection_n(eps: f64, delta: f64) -> u64 {
        let mut n = 1u64;
        while (1.0 - eps).powi(n as i32) > delta * (1.0 + 1e-12) {
            n += 1;
        }
        n
    }
}

/// Offline benchmarks over the toy language.
pub mod bench {
    use std::path::Path;
    use std::sync::Arc;

    use incoherence::campaign::{CampaignConfig, CampaignEnv, ModelEntry};
    use incoherence::coderstore::{candidate_id, CandidateSet, Provenance};
    use incoherence::runner::Runner;
    use incoherence::{Benchmark, Program};

    use super::{int_task, toy_config};

    pub const TASKS: [&str; 3] = ["abs", "double", "mod7"];

    pub const GROUND_TRUTH: [&str; 3] = ["fn f\nabs", "fn f\nmul 2", "fn f\nmod 7"];

    /// Candidate sources per model; the first model is the better one.
    pub fn sources(model: &str) -> [Vec<&'static str>; 3] {
        match model {
            "good" => [
                vec!["fn f\nabs", "fn f\nif_lt 0 neg", "fn f\nabs", "fn f\nif_lt -3 neg"],
                vec!["fn f\nmul 2", "fn f\nadd 0\nmul 2", "fn f\nmul 2", "fn f\nmul 2"],
                vec!["fn f\nmod 7", "fn f\nmod 7", "fn f\nmod 7", "fn f\nmod 7"],
            ],
            _ => [
                vec!["fn f\nneg", "fn f\nabs", "fn f\nif_lt 5 neg", "fn f\nabs"],
                vec!["fn f\nadd 2", "fn f\nmul 2", "fn f\nmul 2\nif_lt 0 neg", "fn f\nadd 1"],
                vec!["fn f\nmod 7", "fn f\nmod 5", "fn f\nmod 7", "fn f\nabs\nmod 7"],
            ],
        }
    }

    pub fn benchmark(with_ground_truth: bool) -> Benchmark {
        let tasks = TASKS
            .iter()
            .zip(GROUND_TRUTH)
            .map(|(id, gt)| {
                let mut t = int_task(id, &[-3, 0, 4, 12]);
                if with_ground_truth {
                    t.ground_truth = Some(Program::new(format!("gt:{id}"), gt, "f", "toy").unwrap());
                }
                t
            })
            .collect();
        Benchmark::new(if with_ground_truth { "toy" } else { "toy-nogt" }, tasks)
    }

    pub fn entry(label: &str) -> ModelEntry {
        ModelEntry {
            label: label.into(),
            provider: None,
        }
    }

    /// Stores the first `m` sources of each task for `label`.
    pub fn adopt(cfg: &CampaignConfig, label: &str, m: usize) {
        let e = entry(label);
        let ns = cfg.namespace(&e);
        let store = cfg.store(&e);
        for (task, srcs) in TASKS.iter().zip(sources(label)) {
            let candidates = srcs
                .iter()
                .take(m)
                .enumerate()
                .map(|(i, s)| Program::new(candidate_id(&ns, task, i + 1), *s, "f", "toy").unwrap())
                .collect();
            let set = CandidateSet::new(
                *task,
                candidates,
                Provenance::Loaded {
                    loaded_from: "fixtures".into(),
                },
            );
            store.save(&set).unwrap();
        }
    }

    pub fn config(root: &Path, with_ground_truth: bool, models: &[&str]) -> CampaignConfig {
        let mut cfg = CampaignConfig::new(
            benchmark(with_ground_truth),
            models.iter().map(|m| entry(m)).collect(),
            root.join("out"),
            root.join("cache"),
        );
        cfg.m = 4;
        cfg.n = 300;
        cfg.rng_seed = 17;
        cfg.workers = 2;
        cfg
    }

    pub fn env() -> CampaignEnv {
        let runner = Runner::new().with_language("toy", toy_config(10.0)).unwrap();
        CampaignEnv::new(Arc::new(runner))
    }
}
