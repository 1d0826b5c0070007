//! Benchmark-level aggregates, rank correlation and ranking agreement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::TaskStats;
use crate::scalar::Probability;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptySet,
    #[error("task {0} has no ground truth")]
    MissingGroundTruth(String),
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("|rho| = {0} exceeds 1")]
    Domain(f64),
}

/// Arithmetic means of empirical error (over tasks with ground truth, `None`
/// if there are none) and empirical incoherence (over all tasks).
pub fn mean_measures<P: Probability>(stats: &[TaskStats]) -> Result<(Option<P>, P), MetricsError> {
    if stats.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let errors: Vec<P> = stats.iter().filter_map(|s| s.empirical_error::<P>()).collect();
    let mean_error = (!errors.is_empty()).then(|| {
        let k = P::from_ratio(errors.len() as u64, 1);
        P::sum_all(errors) / k
    });
    let k = P::from_ratio(stats.len() as u64, 1);
    let mean_inc = P::sum_all(stats.iter().map(|s| s.empirical_incoherence::<P>())) / k;
    Ok((mean_error, mean_inc))
}

/// Outcome of running a task's first candidate on all of its inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleProgramResult {
    pub task_id: String,
    /// `None` when the task has no ground truth.
    pub failures: Option<u64>,
}

/// Fraction of tasks whose single program passes every input.
pub fn empirical_pass_at_1<P: Probability>(results: &[SingleProgramResult]) -> Result<P, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut passed = 0u64;
    for r in results {
        match r.failures {
            None => return Err(MetricsError::MissingGroundTruth(r.task_id.clone())),
            Some(0) => passed += 1,
            Some(_) => {}
        }
    }
    Ok(P::from_ratio(passed, results.len() as u64))
}

/// Among tasks with nonzero error, the fraction with nonzero incoherence.
pub fn detection_rate<P: Probability>(stats: &[TaskStats]) -> Option<P> {
    let erroneous: Vec<&TaskStats> = stats.iter().filter(|s| s.has_error() == Some(true)).collect();
    if erroneous.is_empty() {
        return None;
    }
    let detected = erroneous.iter().filter(|s| s.detected()).count();
    Some(P::from_ratio(detected as u64, erroneous.len() as u64))
}

/// Mean error over tasks with ground truth and zero incoherence.
pub fn undetected_mean_error<P: Probability>(stats: &[TaskStats]) -> Option<P> {
    let errors: Vec<P> = stats
        .iter()
        .filter(|s| !s.detected())
        .filter_map(|s| s.empirical_error::<P>())
        .collect();
    if errors.is_empty() {
        return None;
    }
    let k = P::from_ratio(errors.len() as u64, 1);
    Some(P::sum_all(errors) / k)
}

/// 1-based ranks ascending, ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

// Average ranks are half-integers, so doubled ranks give exact integer
// moments; only the final division and square root round.
fn rank_correlation(rx: &[f64], ry: &[f64]) -> Option<f64> {
    let n = rx.len() as i128;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (a, b) in rx.iter().zip(ry) {
        let (a, b) = ((a * 2.0) as i128, (b * 2.0) as i128);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some((cov as f64 / (vx as f64 * vy as f64).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::DegenerateInput("need at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(MetricsError::DegenerateInput("NaN in input".into()));
    }
    rank_correlation(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| MetricsError::DegenerateInput("constant vector".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationStrength {
    Negligible,
    Weak,
    Moderate,
    Strong,
    #[serde(rename = "Very strong")]
    VeryStrong,
}

impl CorrelationStrength {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationStrength::Negligible => "Negligible",
            CorrelationStrength::Weak => "Weak",
            CorrelationStrength::Moderate => "Moderate",
            CorrelationStrength::Strong => "Strong",
            CorrelationStrength::VeryStrong => "Very strong",
        }
    }
}

pub fn correlation_strength(rho: f64) -> Result<CorrelationStrength, MetricsError> {
    let a = rho.abs();
    if a.is_nan() || a > 1.0 + 1e-12 {
        return Err(MetricsError::Domain(rho));
    }
    Ok(if a < 0.10 {
        CorrelationStrength::Negligible
    } else if a < 0.40 {
        CorrelationStrength::Weak
    } else if a < 0.70 {
        CorrelationStrength::Moderate
    } else if a < 0.90 {
        CorrelationStrength::Strong
    } else {
        CorrelationStrength::VeryStrong
    })
}

/// Interpretation band of `|rho|`, e.g. "Moderate".
pub fn correlation_label(rho: f64) -> Result<&'static str, MetricsError> {
    correlation_strength(rho).map(|s| s.as_str())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub model: String,
    /// Tasks with nonzero empirical error (`None` without ground truth).
    pub nonzero_error_tasks: Option<u64>,
    pub nonzero_incoherence_tasks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingAgreement {
    pub models: Vec<String>,
    /// Rank 1 is the model with the most affected tasks.
    pub rank_by_error_tasks: Option<Vec<f64>>,
    pub rank_by_incoherence_tasks: Vec<f64>,
    pub spearman_rho: Option<f64>,
    pub label: Option<String>,
}

/// Ranks `x` descending with average ties.
pub fn descending_ranks(x: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    average_ranks(&neg)
}

/// Ranks models by affected-task counts and correlates the two rankings.
///
/// Without error counts for every model only the incoherence ranking is
/// produced. A constant ranking leaves `spearman_rho` undefined.
pub fn ranking_agreement(per_model: &[ModelCounts]) -> Result<RankingAgreement, MetricsError> {
    if per_model.len() < 2 {
        return Err(MetricsError::DegenerateInput("need at least two models".into()));
    }
    let inc: Vec<f64> = per_model.iter().map(|c| c.nonzero_incoherence_tasks as f64).collect();
    let err: Option<Vec<f64>> = per_model
        .iter()
        .map(|c| c.nonzero_error_tasks.map(|k| k as f64))
        .collect();
    let rank_inc = descending_ranks(&inc);
    let rank_err = err.as_deref().map(descending_ranks);
    let rho = match &rank_err {
        Some(re) => match spearman_rho(re, &rank_inc) {
            Ok(r) => Some(r),
            Err(MetricsError::DegenerateInput(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let label = match rho {
        Some(r) => Some(format!("{} correlation", correlation_label(r)?)),
        None => None,
    };
    Ok(RankingAgreement {
        models: per_model.iter().map(|c| c.model.clone()).collect(),
        rank_by_error_tasks: rank_err,
        rank_by_incoherence_tasks: rank_inc,
        spearman_rho: rho,
        label,
    })
}

/// Aggregates of one model over a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub benchmark_id: String,
    pub model: String,
    pub per_task: Vec<TaskStats>,
    pub mean_error: Option<f64>,
    pub mean_incoherence: Option<f64>,
    pub pass_at_1: Option<f64>,
    pub detection_rate: Option<f64>,
    pub undetected_mean_error: Option<f64>,
    pub spearman_rho_error_vs_incoherence: Option<f64>,
    pub nonzero_error_tasks: Option<u64>,
    pub nonzero_incoherence_tasks: u64,
}

impl BenchmarkStats {
    /// Aggregates in exact arithmetic, rounding to `f64` only at the end.
    pub fn compute(
        benchmark_id: impl Into<String>,
        model: impl Into<String>,
        per_task: Vec<TaskStats>,
        single: &[SingleProgramResult],
    ) -> Self {
        type Q = num_rational::BigRational;
        let f = |q: Q| q.to_f64();
        let (mean_error, mean_incoherence) = match mean_measures::<Q>(&per_task) {
            Ok((e, i)) => (e.map(f), Some(f(i))),
            Err(_) => (None, None),
        };
        let with_gt: Vec<SingleProgramResult> = single.iter().filter(|r| r.failures.is_some()).cloned().collect();
        let pass_at_1 = empirical_pass_at_1::<Q>(&with_gt).ok().map(f);
        let paired: Vec<(f64, f64)> = per_task
            .iter()
            .filter_map(|s| Some((s.empirical_error::<f64>()?, s.empirical_incoherence::<f64>())))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = paired.into_iter().unzip();
        let rho = spearman_rho(&xs, &ys).ok();
        let has_gt = per_task.iter().any(|s| s.error_mismatches.is_some());
        BenchmarkStats {
            benchmark_id: benchmark_id.into(),
            model: model.into(),
            mean_error,
            mean_incoherence,
            pass_at_1,
            detection_rate: detection_rate::<Q>(&per_task).map(f),
            undetected_mean_error: undetected_mean_error::<Q>(&per_task).map(f),
            spearman_rho_error_vs_incoherence: rho,
            nonzero_error_tasks: has_gt.then(|| per_task.iter().filter(|s| s.has_error() == Some(true)).count() as u64),
            nonzero_incoherence_tasks: per_task.iter().filter(|s| s.detected()).count() as u64,
            per_task,
        }
    }
}
