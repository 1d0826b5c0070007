//! Programming tasks and the benchmark file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inputgen::{GenError, SeedCorpus};
use crate::runner::Program;
use crate::value::InputTuple;

pub const BENCHMARK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("benchmark {path}: {reason}")]
    Benchmark { path: String, reason: String },
    #[error("task {task_id}: {reason}")]
    Invalid { task_id: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
    pub return_type_tag: String,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Renders the signature as a Python `def` line.
    pub fn render(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| {
                if p.type_tag.is_empty() {
                    p.name.clone()
                } else {
                    format!("{}: {}", p.name, p.type_tag)
                }
            })
            .collect();
        let ret = if self.return_type_tag.is_empty() {
            String::new()
        } else {
            format!(" -> {}", self.return_type_tag)
        };
        format!("def {}({}){}:", self.name, params.join(", "), ret)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub description: String,
    pub signature: Signature,
    pub seed_inputs: Vec<InputTuple>,
    #[serde(default)]
    pub ground_truth: Option<Program>,
}

impl Task {
    pub fn validate(&self) -> Result<(), TaskError> {
        let invalid = |reason: String| TaskError::Invalid {
            task_id: self.task_id.clone(),
            reason,
        };
        if self.task_id.is_empty() {
            return Err(invalid("empty task id".into()));
        }
        if !crate::runner::is_identifier(&self.signature.name) {
            return Err(invalid(format!("signature name {:?} is not an identifier", self.signature.name)));
        }
        self.corpus().map_err(|e| invalid(e.to_string()))?;
        if let Some(gt) = &self.ground_truth {
            gt.validate().map_err(|e| invalid(e.to_string()))?;
            if gt.entry_point != self.signature.name {
                return Err(invalid(format!(
                    "ground truth entry point {:?} differs from signature {:?}",
                    gt.entry_point, self.signature.name
                )));
            }
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<SeedCorpus, GenError> {
        SeedCorpus::new(self.task_id.clone(), self.seed_inputs.clone(), self.signature.arity())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub schema_version: u32,
    pub benchmark_id: String,
    pub tasks: Vec<Task>,
}

impl Benchmark {
    pub fn new(benchmark_id: impl Into<String>, tasks: Vec<Task>) -> Self {
        Benchmark {
            schema_version: BENCHMARK_SCHEMA_VERSION,
            benchmark_id: benchmark_id.into(),
            tasks,
        }
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let err = |reason: String| TaskError::Benchmark {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let bench: Benchmark = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        bench.validate().map_err(|e| err(e.to_string()))?;
        Ok(bench)
    }

    pub fn save(&self, path: &Path) -> Result<(), TaskError> {
        let text = serde_json::to_string_pretty(self).expect("benchmark serializes");
        fs::write(path, text + "\n").map_err(|e| TaskError::Benchmark {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if self.schema_version != BENCHMARK_SCHEMA_VERSION {
            return Err(TaskError::Invalid {
                task_id: String::new(),
                reason: format!(
                    "unsupported schema_version {} (expected {BENCHMARK_SCHEMA_VERSION})",
                    self.schema_version
                ),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            t.validate()?;
            if !seen.insert(&t.task_id) {
                return Err(TaskError::Invalid {
                    task_id: t.task_id.clone(),
                    reason: "duplicate task id".into(),
                });
            }
        }
        Ok(())
    }
}
