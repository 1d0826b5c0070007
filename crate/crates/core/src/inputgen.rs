//! Type-aware mutation fuzzing over seed corpora.
//!
//! Every mutation preserves the top-level tag of the value it is applied to.
//! Collections either get a structural operator or, with probability one
//! half when non-empty, pass the step down to a random child.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use num_bigint::BigInt;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{decode_args, encode_args, InputTuple, TypeTag, Value, ValueMap, ValueSet};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("seed corpus for task {0} is empty")]
    EmptyCorpus(String),
    #[error("seed {index} of task {task_id} has arity {found}, signature expects {expected}")]
    ArityMismatch {
        task_id: String,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("input stream {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("input stream {path} line {line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedCorpus {
    pub task_id: String,
    seeds: Vec<InputTuple>,
}

impl SeedCorpus {
    pub fn new(task_id: impl Into<String>, seeds: Vec<InputTuple>, arity: usize) -> Result<Self, GenError> {
        let task_id = task_id.into();
        if seeds.is_empty() {
            return Err(GenError::EmptyCorpus(task_id));
        }
        if let Some((index, s)) = seeds.iter().enumerate().find(|(_, s)| s.len() != arity) {
            return Err(GenError::ArityMismatch {
                task_id,
                index,
                expected: arity,
                found: s.len(),
            });
        }
        Ok(SeedCorpus { task_id, seeds })
    }

    pub fn seeds(&self) -> &[InputTuple] {
        &self.seeds
    }

    pub fn arity(&self) -> usize {
        self.seeds[0].len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n: usize,
    pub max_mutations_per_input: usize,
    pub collection_size_cap: usize,
    pub string_length_cap: usize,
    pub numeric_random_bound: u64,
    pub rng_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 1000,
            max_mutations_per_input: 4,
            collection_size_cap: 256,
            string_length_cap: 1024,
            numeric_random_bound: 1000,
            rng_seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let fields = [
            ("n", self.n as u64),
            ("max_mutations_per_input", self.max_mutations_per_input as u64),
            ("collection_size_cap", self.collection_size_cap as u64),
            ("string_length_cap", self.string_length_cap as u64),
            ("numeric_random_bound", self.numeric_random_bound),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(GenError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// The mutation operators, one per row entry of the type-aware mutation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationOp {
    AddOne,
    SubOne,
    AddTen,
    SubTen,
    AddRandom,
    RandomBool,
    InsertChar,
    DeleteChar,
    ReplaceChar,
    TruncateSubstring,
    ExtendSubstring,
    DuplicateSubstring,
    InsertRandomElement,
    InsertDummyElement,
    SwapElements,
    DuplicateEntry,
    DeleteElement,
    KeepNone,
}

const NUMERIC_OPS: &[MutationOp] = &[
    MutationOp::AddOne,
    MutationOp::SubOne,
    MutationOp::AddTen,
    MutationOp::SubTen,
    MutationOp::AddRandom,
];

/// Every operator that can act on values of `tag`, regardless of size.
///
/// Sets have no meaningful element order or multiplicity, so swap and
/// duplicate are not offered for them.
pub fn operators_for(tag: TypeTag) -> &'static [MutationOp] {
    use MutationOp::*;
    match tag {
        TypeTag::Int | TypeTag::Float => NUMERIC_OPS,
        TypeTag::Bool => &[RandomBool],
        TypeTag::Str => &[
            InsertChar,
            DeleteChar,
            ReplaceChar,
            TruncateSubstring,
            ExtendSubstring,
            DuplicateSubstring,
        ],
        TypeTag::List | TypeTag::Tuple | TypeTag::Dict => &[
            InsertRandomElement,
            InsertDummyElement,
            SwapElements,
            DuplicateEntry,
            DeleteElement,
        ],
        TypeTag::Set => &[InsertRandomElement, InsertDummyElement, DeleteElement],
        TypeTag::None => &[KeepNone],
    }
}

/// Operators applicable to this particular value (size constraints applied).
pub fn applicable_operators(v: &Value) -> Vec<MutationOp> {
    use MutationOp::*;
    let size = v.size();
    operators_for(v.tag())
        .iter()
        .copied()
        .filter(|op| match op {
            DeleteChar | ReplaceChar | TruncateSubstring | DuplicateSubstring => size >= 1,
            DuplicateEntry | DeleteElement => size >= 1,
            SwapElements => size >= 2,
            _ => true,
        })
        .collect()
}

pub trait MutationObserver {
    fn observe(&mut self, tag: TypeTag, op: MutationOp);
}

impl MutationObserver for () {
    fn observe(&mut self, _tag: TypeTag, _op: MutationOp) {}
}

/// Counts how often each (type, operator) pair fired.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OperatorCoverage {
    pub counts: BTreeMap<(TypeTag, MutationOp), u64>,
}

impl MutationObserver for OperatorCoverage {
    fn observe(&mut self, tag: TypeTag, op: MutationOp) {
        *self.counts.entry((tag, op)).or_default() += 1;
    }
}

impl OperatorCoverage {
    /// Operators of `tag` that never fired.
    pub fn missing(&self, tag: TypeTag) -> Vec<MutationOp> {
        operators_for(tag)
            .iter()
            .copied()
            .filter(|op| !self.counts.contains_key(&(tag, *op)))
            .collect()
    }
}

/// One mutation step with uniform operator choice.
pub fn mutate_value<R: Rng + ?Sized>(v: &Value, rng: &mut R, cfg: &GenConfig) -> Value {
    mutate_value_observed(v, rng, cfg, &mut ())
}

pub fn mutate_value_observed<R: Rng + ?Sized, O: MutationObserver + ?Sized>(
    v: &Value,
    rng: &mut R,
    cfg: &GenConfig,
    observer: &mut O,
) -> Value {
    if is_collection(v) && v.size() > 0 && rng.random_bool(0.5) {
        return mutate_child(v, rng, cfg, observer);
    }
    let ops = applicable_operators(v);
    let op = ops[rng.random_range(0..ops.len())];
    observer.observe(v.tag(), op);
    apply_operator(v, op, rng, cfg).expect("operator chosen from the applicable set")
}

fn is_collection(v: &Value) -> bool {
    matches!(v, Value::List(_) | Value::Tuple(_) | Value::Set(_) | Value::Map(_))
}

fn mutate_child<R: Rng + ?Sized, O: MutationObserver + ?Sized>(
    v: &Value,
    rng: &mut R,
    cfg: &GenConfig,
    observer: &mut O,
) -> Value {
    match v {
        Value::List(items) | Value::Tuple(items) => {
            let mut items = items.clone();
            let i = rng.random_range(0..items.len());
            items[i] = mutate_value_observed(&items[i], rng, cfg, observer);
            rebuild_seq(v, items, cfg)
        }
        Value::Set(set) => {
            let mut items = set.clone().into_vec();
            let i = rng.random_range(0..items.len());
            items[i] = mutate_value_observed(&items[i], rng, cfg, observer);
            build_set(items, cfg)
        }
        Value::Map(map) => {
            let mut entries = map.clone().into_vec();
            let i = rng.random_range(0..entries.len());
            entries[i].1 = mutate_value_observed(&entries[i].1, rng, cfg, observer);
            build_map(entries, cfg)
        }
        _ => unreachable!("only called on collections"),
    }
}

/// Applies `op` to `v`; `None` when the operator does not apply.
pub fn apply_operator<R: Rng + ?Sized>(
    v: &Value,
    op: MutationOp,
    rng: &mut R,
    cfg: &GenConfig,
) -> Option<Value> {
    use MutationOp::*;
    if !applicable_operators(v).contains(&op) {
        return None;
    }
    let out = match (v, op) {
        (Value::Int(i), _) => Value::Int(i + numeric_delta(op, rng, cfg)),
        (Value::Float(x), _) => {
            let delta = match op {
                AddRandom => {
                    let b = cfg.numeric_random_bound as f64;
                    rng.random_range(-b..=b)
                }
                _ => fixed_delta(op) as f64,
            };
            Value::Float(x + delta)
        }
        (Value::Bool(_), RandomBool) => Value::Bool(rng.random()),
        (Value::Text(s), _) => Value::Text(mutate_text(s, op, rng, cfg)),
        (Value::None, KeepNone) => Value::None,
        (Value::List(items) | Value::Tuple(items), _) => {
            let items = mutate_sequence(items.clone(), op, rng, cfg);
            rebuild_seq(v, items, cfg)
        }
        (Value::Set(set), _) => {
            let mut items = set.clone().into_vec();
            match op {
                InsertRandomElement => {
                    let e = random_element(items.first(), rng, cfg);
                    items.push(e);
                }
                InsertDummyElement => items.push(dummy_like(items.first())),
                DeleteElement => {
                    let i = rng.random_range(0..items.len());
                    items.remove(i);
                }
                _ => unreachable!("filtered by applicable_operators"),
            }
            build_set(items, cfg)
        }
        (Value::Map(map), _) => {
            let entries = mutate_map(map, op, rng, cfg);
            build_map(entries, cfg)
        }
        _ => unreachable!("filtered by applicable_operators"),
    };
    Some(out)
}

fn fixed_delta(op: MutationOp) -> i64 {
    match op {
        MutationOp::AddOne => 1,
        MutationOp::SubOne => -1,
        MutationOp::AddTen => 10,
        MutationOp::SubTen => -10,
        _ => 0,
    }
}

fn numeric_delta<R: Rng + ?Sized>(op: MutationOp, rng: &mut R, cfg: &GenConfig) -> BigInt {
    match op {
        MutationOp::AddRandom => {
            let b = cfg.numeric_random_bound.min(i64::MAX as u64) as i64;
            BigInt::from(rng.random_range(-b..=b))
        }
        _ => BigInt::from(fixed_delta(op)),
    }
}

fn random_ascii<R: Rng + ?Sized>(rng: &mut R) -> char {
    rng.random_range(0x20u8..=0x7e) as char
}

fn mutate_text<R: Rng + ?Sized>(s: &str, op: MutationOp, rng: &mut R, cfg: &GenConfig) -> String {
    use MutationOp::*;
    let mut chars: Vec<char> = s.chars().collect();
    let n = chars.len();
    match op {
        InsertChar => {
            let i = rng.random_range(0..=n);
            chars.insert(i, random_ascii(rng));
        }
        DeleteChar => {
            chars.remove(rng.random_range(0..n));
        }
        ReplaceChar => {
            let i = rng.random_range(0..n);
            chars[i] = random_ascii(rng);
        }
        TruncateSubstring => {
            let start = rng.random_range(0..n);
            let end = rng.random_range(start + 1..=n);
            chars.drain(start..end);
        }
        ExtendSubstring => {
            // grow a random substring by a run of fresh characters at its end
            let at = rng.random_range(0..=n);
            let run: Vec<char> = (0..rng.random_range(1..=8)).map(|_| random_ascii(rng)).collect();
            chars.splice(at..at, run);
        }
        DuplicateSubstring => {
            let start = rng.random_range(0..n);
            let end = rng.random_range(start + 1..=n);
            let copy: Vec<char> = chars[start..end].to_vec();
            chars.splice(end..end, copy);
        }
        _ => unreachable!("not a text operator"),
    }
    chars.truncate(cfg.string_length_cap);
    chars.into_iter().collect()
}

fn mutate_sequence<R: Rng + ?Sized>(
    mut items: Vec<Value>,
    op: MutationOp,
    rng: &mut R,
    cfg: &GenConfig,
) -> Vec<Value> {
    use MutationOp::*;
    let n = items.len();
    match op {
        InsertRandomElement => {
            let template = (n > 0).then(|| &items[rng.random_range(0..n)]);
            let e = random_element(template, rng, cfg);
            items.insert(rng.random_range(0..=n), e);
        }
        InsertDummyElement => {
            let template = (n > 0).then(|| &items[rng.random_range(0..n)]);
            let e = dummy_like(template);
            items.insert(rng.random_range(0..=n), e);
        }
        SwapElements => {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n - 1);
            let j = if j >= i { j + 1 } else { j };
            items.swap(i, j);
        }
        DuplicateEntry => {
            let i = rng.random_range(0..n);
            let copy = items[i].clone();
            items.insert(rng.random_range(0..=n), copy);
        }
        DeleteElement => {
            items.remove(rng.random_range(0..n));
        }
        _ => unreachable!("not a sequence operator"),
    }
    items
}

fn mutate_map<R: Rng + ?Sized>(map: &ValueMap, op: MutationOp, rng: &mut R, cfg: &GenConfig) -> Vec<(Value, Value)> {
    use MutationOp::*;
    let mut entries = map.clone().into_vec();
    let n = entries.len();
    let template = (n > 0).then(|| entries[rng.random_range(0..n)].clone());
    match op {
        InsertRandomElement => {
            let k = random_element(template.as_ref().map(|t| &t.0), rng, cfg);
            let v = random_element(template.as_ref().map(|t| &t.1), rng, cfg);
            entries.push((k, v));
        }
        InsertDummyElement => {
            let k = dummy_like(template.as_ref().map(|t| &t.0));
            let v = dummy_like(template.as_ref().map(|t| &t.1));
            entries.push((k, v));
        }
        SwapElements => {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n - 1);
            let j = if j >= i { j + 1 } else { j };
            let vi = entries[i].1.clone();
            entries[i].1 = std::mem::replace(&mut entries[j].1, vi);
        }
        DuplicateEntry => {
            // copy an existing value under a fresh key
            let (k, v) = template.expect("non-empty map");
            let fresh = random_element(Some(&k), rng, cfg);
            entries.push((fresh, v));
        }
        DeleteElement => {
            entries.remove(rng.random_range(0..n));
        }
        _ => unreachable!("not a map operator"),
    }
    entries
}

fn rebuild_seq(like: &Value, mut items: Vec<Value>, cfg: &GenConfig) -> Value {
    items.truncate(cfg.collection_size_cap);
    match like {
        Value::Tuple(_) => Value::Tuple(items),
        _ => Value::List(items),
    }
}

fn build_set(items: Vec<Value>, cfg: &GenConfig) -> Value {
    let items: Vec<Value> = items.into_iter().filter(Value::is_hashable).collect();
    let mut set = ValueSet::new(items).expect("filtered to hashable").into_vec();
    set.truncate(cfg.collection_size_cap);
    Value::Set(ValueSet::new(set).expect("hashable"))
}

fn build_map(entries: Vec<(Value, Value)>, cfg: &GenConfig) -> Value {
    let entries: Vec<_> = entries.into_iter().filter(|(k, _)| k.is_hashable()).collect();
    let mut map = ValueMap::from_entries_last_wins(entries).expect("filtered to hashable").into_vec();
    map.truncate(cfg.collection_size_cap);
    Value::Map(ValueMap::new(map).expect("unique keys"))
}

/// A fresh random value shaped like `template` (an Integer when there is no
/// template, e.g. inserting into an empty collection).
pub fn random_element<R: Rng + ?Sized>(template: Option<&Value>, rng: &mut R, cfg: &GenConfig) -> Value {
    let Some(t) = template else {
        return random_element(Some(&Value::int(0)), rng, cfg);
    };
    let bound = cfg.numeric_random_bound.min(i64::MAX as u64) as i64;
    match t {
        Value::None => Value::None,
        Value::Bool(_) => Value::Bool(rng.random()),
        Value::Int(_) => Value::int(rng.random_range(-bound..=bound)),
        Value::Float(_) => {
            let b = bound as f64;
            Value::Float(rng.random_range(-b..=b))
        }
        Value::Text(_) => {
            let len = rng.random_range(0..=8usize.min(cfg.string_length_cap));
            Value::Text((0..len).map(|_| random_ascii(rng)).collect())
        }
        Value::Tuple(items) => Value::Tuple(items.iter().map(|c| random_element(Some(c), rng, cfg)).collect()),
        Value::List(items) => Value::List(random_children(items, rng, cfg)),
        Value::Set(set) => {
            let items: Vec<Value> = set.iter().cloned().collect();
            build_set(random_children(&items, rng, cfg), cfg)
        }
        Value::Map(map) => {
            let entries: Vec<_> = map.iter().cloned().collect();
            if entries.is_empty() {
                return Value::Map(ValueMap::default());
            }
            let len = rng.random_range(0..=3usize.min(cfg.collection_size_cap));
            let fresh = (0..len)
                .map(|_| {
                    let (k, v) = &entries[rng.random_range(0..entries.len())];
                    (random_element(Some(k), rng, cfg), random_element(Some(v), rng, cfg))
                })
                .collect();
            build_map(fresh, cfg)
        }
    }
}

fn random_children<R: Rng + ?Sized>(items: &[Value], rng: &mut R, cfg: &GenConfig) -> Vec<Value> {
    if items.is_empty() {
        return Vec::new();
    }
    let len = rng.random_range(0..=3usize.min(cfg.collection_size_cap));
    (0..len)
        .map(|_| {
            let t = &items[rng.random_range(0..items.len())];
            random_element(Some(t), rng, cfg)
        })
        .collect()
}

/// The dummy element for a slot whose neighbours look like `template`.
pub fn dummy_like(template: Option<&Value>) -> Value {
    match template {
        None | Some(Value::Int(_)) => Value::int(0),
        Some(Value::Float(_)) => Value::Float(0.0),
        Some(Value::Bool(_)) => Value::Bool(false),
        Some(Value::Text(_)) => Value::text(""),
        Some(Value::None) => Value::None,
        Some(Value::List(_)) => Value::List(Vec::new()),
        Some(Value::Tuple(items)) => Value::Tuple(items.iter().map(|c| dummy_like(Some(c))).collect()),
        Some(Value::Set(_)) => Value::Set(ValueSet::default()),
        Some(Value::Map(_)) => Value::Map(ValueMap::default()),
    }
}

/// Endless, deterministic stream of fuzzed inputs.
///
/// Each item mutates a uniformly chosen member of the working corpus (seeds
/// plus everything emitted so far) with `k ~ U[1, max_mutations_per_input]`
/// steps on uniformly chosen argument positions, then joins the corpus.
pub struct FuzzStream<'c, R> {
    working: Vec<InputTuple>,
    cfg: &'c GenConfig,
    rng: R,
}

impl<'c, R: Rng> FuzzStream<'c, R> {
    pub fn new(corpus: &SeedCorpus, cfg: &'c GenConfig, rng: R) -> Self {
        FuzzStream {
            working: corpus.seeds().to_vec(),
            cfg,
            rng,
        }
    }

    pub fn next_observed<O: MutationObserver + ?Sized>(&mut self, observer: &mut O) -> InputTuple {
        let parent = &self.working[self.rng.random_range(0..self.working.len())];
        let mut child = parent.clone();
        if !child.is_empty() {
            let steps = self.rng.random_range(1..=self.cfg.max_mutations_per_input);
            for _ in 0..steps {
                let pos = self.rng.random_range(0..child.len());
                child[pos] = mutate_value_observed(&child[pos], &mut self.rng, self.cfg, observer);
            }
        }
        self.working.push(child.clone());
        child
    }
}

impl<R: Rng> Iterator for FuzzStream<'_, R> {
    type Item = InputTuple;

    fn next(&mut self) -> Option<InputTuple> {
        Some(self.next_observed(&mut ()))
    }
}

/// Generates `cfg.n` inputs from the corpus.
pub fn generate_inputs<R: Rng>(corpus: &SeedCorpus, cfg: &GenConfig, rng: R) -> Result<Vec<InputTuple>, GenError> {
    cfg.validate()?;
    Ok(FuzzStream::new(corpus, cfg, rng).take(cfg.n).collect())
}

/// Writes inputs as newline-delimited canonical argument arrays.
pub fn write_inputs(path: &Path, inputs: &[InputTuple]) -> Result<(), GenError> {
    let io_err = |source| GenError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    let file = fs::File::create(&tmp).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for input in inputs {
        writeln!(w, "{}", encode_args(input)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_inputs(path: &Path) -> Result<Vec<InputTuple>, GenError> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| GenError::Io {
        path: name.clone(),
        source,
    })?;
    io::BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line.map_err(|source| GenError::Io {
                path: name.clone(),
                source,
            })?;
            decode_args(&line).map_err(|e| GenError::Malformed {
                path: name.clone(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
