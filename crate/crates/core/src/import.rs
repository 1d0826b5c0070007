//! Best-effort converter from EvalPlus-style JSONL (HumanEval+ / MBPP+) to
//! the benchmark format.
//!
//! This is a reconstruction: the prompt is used verbatim as the task
//! description, seeds come from `base_input`, and JSON cannot distinguish
//! tuples or sets from lists, so every sequence becomes a list.

use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use serde::Deserialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::runner::Program;
use crate::task::{Benchmark, Param, Signature, Task};
use crate::value::{InputTuple, Value, ValueMap};

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },
}

#[derive(Deserialize)]
struct Record {
    task_id: String,
    prompt: String,
    entry_point: String,
    #[serde(default)]
    canonical_solution: Option<String>,
    #[serde(default)]
    base_input: Vec<Json>,
}

/// Tasks converted plus `(task_id, reason)` for records that were skipped.
pub struct Imported {
    pub benchmark: Benchmark,
    pub skipped: Vec<(String, String)>,
}

pub fn json_to_value(j: &Json) -> Result<Value, String> {
    Ok(match j {
        Json::Null => Value::None,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                Value::int(i)
            } else if let Some(u) = n.as_u64() {
                Value::Int(BigInt::from(u))
            } else {
                Value::Float(n.as_f64().ok_or("unrepresentable number")?)
            }
        }
        Json::String(s) => Value::text(s.clone()),
        Json::Array(items) => Value::List(items.iter().map(json_to_value).collect::<Result<_, _>>()?),
        Json::Object(map) => {
            let entries = map
                .iter()
                .map(|(k, v)| Ok((Value::text(k.clone()), json_to_value(v)?)))
                .collect::<Result<Vec<_>, String>>()?;
            Value::Map(ValueMap::new(entries).map_err(|e| e.to_string())?)
        }
    })
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect()
}

/// Parses `def name(a: int, b: List[int] = None) -> str:` out of a prompt.
pub fn parse_signature(prompt: &str, entry_point: &str) -> Result<Signature, String> {
    let header = format!("def {entry_point}(");
    let start = prompt.find(&header).ok_or_else(|| format!("no `{header}` in prompt"))? + header.len();
    let rest = &prompt[start..];
    let mut depth = 1i32;
    let mut close = None;
    for (i, c) in rest.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = close.ok_or("unterminated parameter list")?;
    let mut params = Vec::new();
    for p in split_top_level(&rest[..close]) {
        let p = p.split('=').next().unwrap_or(p).trim();
        if p == "*" || p == "/" || p == "self" {
            continue;
        }
        let (name, ty) = match p.split_once(':') {
            Some((n, t)) => (n.trim(), t.trim()),
            None => (p, ""),
        };
        params.push(Param {
            name: name.trim_start_matches('*').to_owned(),
            type_tag: ty.to_owned(),
        });
    }
    let after = &rest[close + 1..];
    let ret = after
        .split_once(':')
        .map(|(head, _)| head.trim().trim_start_matches("->").trim().to_owned())
        .unwrap_or_default();
    Ok(Signature {
        name: entry_point.to_owned(),
        params,
        return_type_tag: ret,
    })
}

fn convert(r: Record) -> Result<Task, String> {
    let signature = parse_signature(&r.prompt, &r.entry_point)?;
    let arity = signature.arity();
    let mut seeds: Vec<InputTuple> = Vec::new();
    for (i, args) in r.base_input.iter().enumerate() {
        let list = args.as_array().ok_or_else(|| format!("base_input[{i}] is not an argument list"))?;
        if list.len() != arity {
            return Err(format!("base_input[{i}] has {} arguments, signature has {arity}", list.len()));
        }
        seeds.push(list.iter().map(json_to_value).collect::<Result<_, _>>()?);
    }
    if seeds.is_empty() {
        return Err("no base_input seeds".into());
    }
    let ground_truth = match r.canonical_solution {
        Some(body) if !body.trim().is_empty() => {
            let source = if body.contains(&format!("def {}(", r.entry_point)) {
                body
            } else {
                format!("{}{}", r.prompt, body)
            };
            Some(
                Program::new(format!("gt:{}", r.task_id), source, r.entry_point.clone(), "python")
                    .map_err(|e| e.to_string())?,
            )
        }
        _ => None,
    };
    let task = Task {
        task_id: r.task_id,
        description: r.prompt,
        signature,
        seed_inputs: seeds,
        ground_truth,
    };
    task.validate().map_err(|e| e.to_string())?;
    Ok(task)
}

pub fn import_evalplus(path: &Path, benchmark_id: &str, keep_ground_truth: bool) -> Result<Imported, ImportError> {
    let text = fs::read_to_string(path).map_err(|e| ImportError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut tasks = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(line).map_err(|e| ImportError::Record {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let id = r.task_id.clone();
        match convert(r) {
            Ok(mut t) => {
                if !keep_ground_truth {
                    t.ground_truth = None;
                }
                tasks.push(t);
            }
            Err(reason) => skipped.push((id, reason)),
        }
    }
    Ok(Imported {
        benchmark: Benchmark::new(benchmark_id, tasks),
        skipped,
    })
}
