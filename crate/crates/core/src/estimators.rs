//! PAC estimation and detection of error and incoherence, plus the
//! fixed-budget empirical estimators used by campaigns.
//!
//! The algorithms are written against three small traits: a program sampler,
//! an input sampler and a [`Semantics`] that runs a program on an input and
//! compares outcomes. Real campaigns plug in the subprocess runner; the
//! simulator plugs in table lookup.

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{outcomes_equal, Executor, Outcome, Program, RunnerError};
use crate::scalar::Probability;
use crate::value::{encode_args, FloatPolicy, InputTuple};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
}

#[derive(Debug, Error)]
pub enum InfrastructureError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("ground truth did not return normally on {input}: {detail}")]
    GroundTruthAbort { input: String, detail: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacParams {
    epsilon: f64,
    delta: f64,
}

impl PacParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, DomainError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(DomainError::Epsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(DomainError::Delta(delta));
        }
        Ok(PacParams { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for PacParams {
    fn default() -> Self {
        PacParams {
            epsilon: 0.05,
            delta: 0.05,
        }
    }
}

// An expression that is an integer in exact arithmetic can land a few ulps
// above it in floating point; ceil would then overshoot by one.
fn ceil_snapped(x: f64) -> u64 {
    let r = x.round();
    let n = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { x.ceil() };
    n.max(1.0) as u64
}

/// `⌈ln(2/δ) / (2ε²)⌉`, with `δ` allowed anywhere in `(0, 2)`.
pub fn estimation_sample_size(epsilon: f64, delta: f64) -> Result<u64, DomainError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DomainError::Epsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(DomainError::Delta(delta));
    }
    Ok(ceil_snapped((2.0 / delta).ln() / (2.0 * epsilon * epsilon)))
}

/// Hoeffding sample size for estimating a probability within `ε` with
/// confidence `1 - δ`.
pub fn plan_estimation_samples(p: &PacParams) -> u64 {
    estimation_sample_size(p.epsilon, p.delta).expect("PacParams are validated")
}

/// `⌈ln δ / ln(1 − ε)⌉`: trials after which a disagreement of probability at
/// least `ε` is missed with probability at most `δ`.
pub fn plan_detection_samples(p: &PacParams) -> u64 {
    ceil_snapped(p.delta.ln() / (1.0 - p.epsilon).ln())
}

pub trait SamplingCoder {
    type Prog: Clone + Debug;
    fn sample_program<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Prog;
}

pub trait SamplingGen {
    type Input: Clone + Debug;
    fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Input;
}

/// How programs behave and when two behaviours count as the same.
pub trait Semantics<P, I> {
    type Out: Clone + Debug;
    fn run(&self, program: &P, input: &I) -> Result<Self::Out, InfrastructureError>;
    fn same(&self, a: &Self::Out, b: &Self::Out) -> bool;

    /// Rejects reference outcomes that cannot serve as ground truth.
    fn check_reference(&self, _input: &I, _out: &Self::Out) -> Result<(), InfrastructureError> {
        Ok(())
    }
}

/// Execution through a runner with the configured float tolerance.
pub struct ExecSemantics<E> {
    pub executor: E,
    pub policy: FloatPolicy,
}

impl<E: Executor> Semantics<Program, InputTuple> for ExecSemantics<E> {
    type Out = Outcome;

    fn run(&self, program: &Program, input: &InputTuple) -> Result<Outcome, InfrastructureError> {
        Ok(self.executor.execute(program, input)?)
    }

    fn same(&self, a: &Outcome, b: &Outcome) -> bool {
        outcomes_equal(a, b, &self.policy)
    }

    fn check_reference(&self, input: &InputTuple, out: &Outcome) -> Result<(), InfrastructureError> {
        if out.is_ok() {
            return Ok(());
        }
        Err(InfrastructureError::GroundTruthAbort {
            input: encode_args(input),
            detail: format!("{:?}: {}", out.status(), out.diagnostic().unwrap_or("")),
        })
    }
}

/// Uniform choice among candidates: the empirical coder.
pub struct UniformCoder<'a, P> {
    pub candidates: &'a [P],
}

impl<P: Clone + Debug> SamplingCoder for UniformCoder<'_, P> {
    type Prog = P;
    fn sample_program<R: Rng + ?Sized>(&self, rng: &mut R) -> P {
        self.candidates[rng.random_range(0..self.candidates.len())].clone()
    }
}

/// Uniform choice among a fixed list of inputs.
pub struct UniformGen<'a, I> {
    pub inputs: &'a [I],
}

impl<I: Clone + Debug> SamplingGen for UniformGen<'_, I> {
    type Input = I;
    fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> I {
        self.inputs[rng.random_range(0..self.inputs.len())].clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub hits: u64,
    pub samples_used: u64,
    pub epsilon: f64,
    pub delta: f64,
}

impl EstimateResult {
    pub fn point_estimate<P: Probability>(&self) -> P {
        P::from_ratio(self.hits, self.samples_used)
    }

    pub fn estimate(&self) -> f64 {
        self.point_estimate::<f64>()
    }
}

/// Two programs and an input on which they disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness<P, I> {
    pub first: P,
    pub second: P,
    pub input: I,
}

impl<P, I> Witness<P, I> {
    /// Re-executes both programs; true when the disagreement reproduces.
    pub fn replay<S: Semantics<P, I>>(&self, sem: &S) -> Result<bool, InfrastructureError> {
        let a = sem.run(&self.first, &self.input)?;
        let b = sem.run(&self.second, &self.input)?;
        Ok(!sem.same(&a, &b))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection<P, I> {
    pub trials_used: u64,
    pub witness: Option<Witness<P, I>>,
}

impl<P, I> Detection<P, I> {
    pub fn detected(&self) -> bool {
        self.witness.is_some()
    }
}

pub fn estimate_error<C, G, S, R>(
    coder: &C,
    gen: &G,
    gt: &C::Prog,
    sem: &S,
    p: &PacParams,
    rng: &mut R,
) -> Result<EstimateResult, InfrastructureError>
where
    C: SamplingCoder,
    G: SamplingGen,
    S: Semantics<C::Prog, G::Input>,
    R: Rng + ?Sized,
{
    let n = plan_estimation_samples(p);
    let mut hits = 0;
    for _ in 0..n {
        let prog = coder.sample_program(rng);
        let x = gen.sample_input(rng);
        let reference = sem.run(gt, &x)?;
        sem.check_reference(&x, &reference)?;
        if !sem.same(&sem.run(&prog, &x)?, &reference) {
            hits += 1;
        }
    }
    Ok(EstimateResult {
        hits,
        samples_used: n,
        epsilon: p.epsilon,
        delta: p.delta,
    })
}

pub fn estimate_incoherence<C, G, S, R>(
    coder: &C,
    gen: &G,
    sem: &S,
    p: &PacParams,
    rng: &mut R,
) -> Result<EstimateResult, InfrastructureError>
where
    C: SamplingCoder,
    G: SamplingGen,
    S: Semantics<C::Prog, G::Input>,
    R: Rng + ?Sized,
{
    let n = plan_estimation_samples(p);
    let mut hits = 0;
    for _ in 0..n {
        let a = coder.sample_program(rng);
        let b = coder.sample_program(rng);
        let x = gen.sample_input(rng);
        if !sem.same(&sem.run(&a, &x)?, &sem.run(&b, &x)?) {
            hits += 1;
        }
    }
    Ok(EstimateResult {
        hits,
        samples_used: n,
        epsilon: p.epsilon,
        delta: p.delta,
    })
}

/// Stops at the first observed disagreement and returns it as a witness.
pub fn detect_incoherence<C, G, S, R>(
    coder: &C,
    gen: &G,
    sem: &S,
    p: &PacParams,
    rng: &mut R,
) -> Result<Detection<C::Prog, G::Input>, InfrastructureError>
where
    C: SamplingCoder,
    G: SamplingGen,
    S: Semantics<C::Prog, G::Input>,
    R: Rng + ?Sized,
{
    let n = plan_detection_samples(p);
    for i in 1..=n {
        let a = coder.sample_program(rng);
        let b = coder.sample_program(rng);
        let x = gen.sample_input(rng);
        if !sem.same(&sem.run(&a, &x)?, &sem.run(&b, &x)?) {
            return Ok(Detection {
                trials_used: i,
                witness: Some(Witness {
                    first: a,
                    second: b,
                    input: x,
                }),
            });
        }
    }
    Ok(Detection {
        trials_used: n,
        witness: None,
    })
}

/// Mismatch count over a fixed input list, with the first mismatch kept.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalResult<P, I> {
    pub mismatches: u64,
    pub n: u64,
    pub witness: Option<Witness<P, I>>,
}

impl<P, I> EmpiricalResult<P, I> {
    pub fn value<Q: Probability>(&self) -> Q {
        Q::from_ratio(self.mismatches, self.n)
    }
}

fn check_inputs<P, I>(candidates: &[P], inputs: &[I]) -> Result<(), InfrastructureError> {
    if candidates.is_empty() {
        return Err(InfrastructureError::Invalid("no candidates".into()));
    }
    if inputs.is_empty() {
        return Err(InfrastructureError::Invalid("no inputs".into()));
    }
    Ok(())
}

/// `(1/n) Σ 𝟙[π_{y_i}(x_i) ≠ gt(x_i)]` with `y_i` uniform over the candidates.
///
/// The witness of an error pairs the failing candidate (`first`) with the
/// ground truth (`second`).
pub fn empirical_error<P, I, S, R>(
    candidates: &[P],
    gt: &P,
    inputs: &[I],
    sem: &S,
    rng: &mut R,
) -> Result<EmpiricalResult<P, I>, InfrastructureError>
where
    P: Clone,
    I: Clone,
    S: Semantics<P, I>,
    R: Rng + ?Sized,
{
    check_inputs(candidates, inputs)?;
    let m = candidates.len();
    let mut mismatches = 0;
    let mut witness = None;
    for x in inputs {
        let y = rng.random_range(0..m);
        let reference = sem.run(gt, x)?;
        sem.check_reference(x, &reference)?;
        if !sem.same(&sem.run(&candidates[y], x)?, &reference) {
            mismatches += 1;
            witness.get_or_insert_with(|| Witness {
                first: candidates[y].clone(),
                second: gt.clone(),
                input: x.clone(),
            });
        }
    }
    Ok(EmpiricalResult {
        mismatches,
        n: inputs.len() as u64,
        witness,
    })
}

/// `(1/n) Σ 𝟙[π_{y_i}(x_i) ≠ π_{y'_i}(x_i)]` with `y_i`, `y'_i` drawn
/// independently and with replacement.
pub fn empirical_incoherence<P, I, S, R>(
    candidates: &[P],
    inputs: &[I],
    sem: &S,
    rng: &mut R,
) -> Result<EmpiricalResult<P, I>, InfrastructureError>
where
    P: Clone,
    I: Clone,
    S: Semantics<P, I>,
    R: Rng + ?Sized,
{
    check_inputs(candidates, inputs)?;
    let m = candidates.len();
    let mut mismatches = 0;
    let mut witness = None;
    for x in inputs {
        let y = rng.random_range(0..m);
        let y2 = rng.random_range(0..m);
        if y == y2 {
            continue;
        }
        if !sem.same(&sem.run(&candidates[y], x)?, &sem.run(&candidates[y2], x)?) {
            mismatches += 1;
            witness.get_or_insert_with(|| Witness {
                first: candidates[y].clone(),
                second: candidates[y2].clone(),
                input: x.clone(),
            });
        }
    }
    Ok(EmpiricalResult {
        mismatches,
        n: inputs.len() as u64,
        witness,
    })
}

/// Outcome of running both empirical estimators on shared index draws.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledCheck {
    pub n: u64,
    pub disagreements: u64,
    pub first_errors: u64,
    pub second_errors: u64,
    /// Inputs where the two candidates disagree yet both match ground truth.
    pub violations: u64,
}

impl CoupledCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.disagreements <= self.first_errors + self.second_errors
    }
}

/// Every disagreement term must be explained by an error of one of its two
/// candidates; checked term by term on common `(y_i, y'_i)` draws.
pub fn coupled_witness_check<P, I, S, R>(
    candidates: &[P],
    gt: &P,
    inputs: &[I],
    sem: &S,
    rng: &mut R,
) -> Result<CoupledCheck, InfrastructureError>
where
    S: Semantics<P, I>,
    R: Rng + ?Sized,
{
    check_inputs(candidates, inputs)?;
    let m = candidates.len();
    let mut c = CoupledCheck {
        n: inputs.len() as u64,
        ..CoupledCheck::default()
    };
    for x in inputs {
        let y = rng.random_range(0..m);
        let y2 = rng.random_range(0..m);
        let reference = sem.run(gt, x)?;
        sem.check_reference(x, &reference)?;
        let a = sem.run(&candidates[y], x)?;
        let b = sem.run(&candidates[y2], x)?;
        let ea = !sem.same(&a, &reference);
        let eb = !sem.same(&b, &reference);
        let d = !sem.same(&a, &b);
        c.first_errors += ea as u64;
        c.second_errors += eb as u64;
        c.disagreements += d as u64;
        if d && !ea && !eb {
            c.violations += 1;
        }
    }
    Ok(c)
}

/// Per-(model, task) measurements as counts over `n` inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub task_id: String,
    pub m: u64,
    pub n: u64,
    /// `None` when the task has no ground truth.
    pub error_mismatches: Option<u64>,
    pub incoherence_mismatches: u64,
}

impl TaskStats {
    pub fn empirical_error<P: Probability>(&self) -> Option<P> {
        self.error_mismatches.map(|k| P::from_ratio(k, self.n))
    }

    pub fn empirical_incoherence<P: Probability>(&self) -> P {
        P::from_ratio(self.incoherence_mismatches, self.n)
    }

    pub fn detected(&self) -> bool {
        self.incoherence_mismatches > 0
    }

    pub fn has_error(&self) -> Option<bool> {
        self.error_mismatches.map(|k| k > 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Programs are functions from a small input index to an output.
    struct Lookup(Vec<Vec<i32>>);

    impl Semantics<usize, usize> for Lookup {
        type Out = i32;
        fn run(&self, p: &usize, x: &usize) -> Result<i32, InfrastructureError> {
            Ok(self.0[*p][*x])
        }
        fn same(&self, a: &i32, b: &i32) -> bool {
            a == b
        }
    }

    #[test]
    fn planners_match_closed_forms() {
        let p = |e, d| PacParams::new(e, d).unwrap();
        assert_eq!(plan_estimation_samples(&p(0.1, 0.05)), 185);
        assert_eq!(plan_estimation_samples(&p(0.05, 0.05)), 738);
        assert_eq!(estimation_sample_size(0.5, 1.999).unwrap(), 1);
        assert_eq!(plan_detection_samples(&p(0.1, 0.05)), 29);
        assert_eq!(plan_detection_samples(&p(0.5, 0.5)), 1);
        assert_eq!(plan_detection_samples(&p(0.01, 0.01)), 459);
    }

    #[test]
    fn pac_params_reject_boundaries() {
        for (e, d) in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (f64::NAN, 0.5)] {
            assert!(PacParams::new(e, d).is_err(), "{e} {d}");
        }
        assert!(estimation_sample_size(0.5, 2.0).is_err());
    }

    #[test]
    fn trivial_estimates_are_exact() {
        let sem = Lookup(vec![vec![0, 1], vec![5, 5]]);
        let gen = UniformGen { inputs: &[0usize, 1] };
        let p = PacParams::new(0.1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = UniformCoder { candidates: &[0usize] };
        assert_eq!(estimate_error(&same, &gen, &0, &sem, &p, &mut rng).unwrap().hits, 0);
        let wrong = UniformCoder { candidates: &[1usize] };
        let r = estimate_error(&wrong, &gen, &0, &sem, &p, &mut rng).unwrap();
        assert_eq!(r.hits, r.samples_used);
        assert_eq!(estimate_incoherence(&same, &gen, &sem, &p, &mut rng).unwrap().hits, 0);
        assert!(!detect_incoherence(&same, &gen, &sem, &p, &mut rng).unwrap().detected());
    }

    #[test]
    fn detection_witness_replays() {
        let sem = Lookup(vec![vec![0, 1], vec![0, 2]]);
        let coder = UniformCoder { candidates: &[0usize, 1] };
        let gen = UniformGen { inputs: &[0usize, 1] };
        let p = PacParams::new(0.1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = detect_incoherence(&coder, &gen, &sem, &p, &mut rng).unwrap();
        let w = d.witness.expect("disagreement probability 1/4 over 29 trials");
        assert_eq!(w.input, 1);
        assert!(w.replay(&sem).unwrap());
    }

    #[test]
    fn empirical_single_candidate_is_coherent() {
        let sem = Lookup(vec![vec![3, 4, 5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = empirical_incoherence(&[0usize], &[0usize, 1, 2], &sem, &mut rng).unwrap();
        assert_eq!(r.mismatches, 0);
        assert!(r.witness.is_none());
    }

    #[test]
    fn coupled_check_holds_on_small_case() {
        let sem = Lookup(vec![vec![0, 1, 2], vec![0, 1, 3], vec![9, 1, 2]]);
        let inputs: Vec<usize> = (0..3).cycle().take(300).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = coupled_witness_check(&[1usize, 2], &0, &inputs, &sem, &mut rng).unwrap();
        assert!(c.holds());
        assert!(c.disagreements > 0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let sem = Lookup(vec![vec![0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(empirical_incoherence(&[0usize], &[] as &[usize], &sem, &mut rng).is_err());
    }
}
