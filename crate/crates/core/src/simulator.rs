//! Finite synthetic coders and input distributions with exactly computable
//! error and incoherence.
//!
//! A program is an [`OutputTable`] over a shared finite domain. All exact
//! quantities are plain weighted sums over the tables; with
//! [`BigRational`] weights they carry no rounding at all.

use std::fmt;

use num_rational::BigRational;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{InfrastructureError, SamplingCoder, SamplingGen, Semantics};
use crate::runner::{outcomes_equal, Outcome};
use crate::scalar::Probability;
use crate::value::{FloatPolicy, InputTuple, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("tables are defined over different domains: {0}")]
    DomainMismatch(String),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("fixture: {0}")]
    Fixture(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputTable {
    pub domain: Vec<InputTuple>,
    pub outputs: Vec<Outcome>,
}

impl OutputTable {
    pub fn new(domain: Vec<InputTuple>, outputs: Vec<Outcome>) -> Result<Self, SimError> {
        if domain.len() != outputs.len() {
            return Err(SimError::DomainMismatch(format!(
                "{} inputs but {} outputs",
                domain.len(),
                outputs.len()
            )));
        }
        Ok(OutputTable { domain, outputs })
    }

    /// Table of integer results on inputs `(0,), (1,), ...`.
    pub fn from_ints(outputs: &[i64]) -> Self {
        OutputTable {
            domain: int_domain(outputs.len()),
            outputs: outputs.iter().map(|&v| Outcome::ok(Value::int(v))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Extensional equality on the whole domain.
    pub fn same_function(&self, other: &OutputTable, policy: &FloatPolicy) -> bool {
        self.outputs.len() == other.outputs.len()
            && self.outputs.iter().zip(&other.outputs).all(|(a, b)| outcomes_equal(a, b, policy))
    }
}

/// `[(0,), (1,), ..., (n-1,)]`.
pub fn int_domain(n: usize) -> Vec<InputTuple> {
    (0..n).map(|i| vec![Value::int(i as i64)]).collect()
}

fn check_weights<P: Probability>(w: &[P], what: &str) -> Result<(), SimError> {
    if w.is_empty() {
        return Err(SimError::Weights(format!("{what}: empty")));
    }
    if w.iter().any(|x| *x < P::zero()) {
        return Err(SimError::Weights(format!("{what}: negative weight")));
    }
    let total = P::sum_all(w.iter().cloned());
    if !P::is_unit(&total) {
        return Err(SimError::Weights(format!("{what}: weights sum to {total:?}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCoder<P> {
    pub programs: Vec<OutputTable>,
    pub weights: Vec<P>,
}

impl<P: Probability> SyntheticCoder<P> {
    pub fn new(programs: Vec<OutputTable>, weights: Vec<P>) -> Result<Self, SimError> {
        if programs.len() != weights.len() {
            return Err(SimError::Weights(format!(
                "{} programs but {} weights",
                programs.len(),
                weights.len()
            )));
        }
        check_weights(&weights, "coder")?;
        if let Some(p) = programs.iter().find(|p| p.domain != programs[0].domain) {
            return Err(SimError::DomainMismatch(format!("program over {} inputs", p.len())));
        }
        Ok(SyntheticCoder { programs, weights })
    }

    /// Equal weight on each program.
    pub fn uniform(programs: Vec<OutputTable>) -> Result<Self, SimError> {
        let m = programs.len().max(1) as u64;
        let weights = (0..programs.len()).map(|_| P::from_ratio(1, m)).collect();
        SyntheticCoder::new(programs, weights)
    }

    pub fn domain(&self) -> &[InputTuple] {
        &self.programs[0].domain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticGen<P> {
    pub support: Vec<InputTuple>,
    pub probabilities: Vec<P>,
}

impl<P: Probability> SyntheticGen<P> {
    pub fn new(support: Vec<InputTuple>, probabilities: Vec<P>) -> Result<Self, SimError> {
        if support.len() != probabilities.len() {
            return Err(SimError::Weights(format!(
                "{} inputs but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        check_weights(&probabilities, "gen")?;
        Ok(SyntheticGen { support, probabilities })
    }

    pub fn uniform(support: Vec<InputTuple>) -> Result<Self, SimError> {
        let n = support.len().max(1) as u64;
        let probabilities = (0..support.len()).map(|_| P::from_ratio(1, n)).collect();
        SyntheticGen::new(support, probabilities)
    }
}

fn aligned<P>(c: &SyntheticCoder<P>, g: &SyntheticGen<P>, gt: Option<&OutputTable>) -> Result<(), SimError> {
    if c.programs[0].domain != g.support {
        return Err(SimError::DomainMismatch("coder tables and gen support differ".into()));
    }
    if let Some(gt) = gt {
        if gt.domain != g.support {
            return Err(SimError::DomainMismatch("ground truth table and gen support differ".into()));
        }
    }
    Ok(())
}

fn gt_aligned<P>(c: &SyntheticCoder<P>, gt: &OutputTable) -> Result<(), SimError> {
    if gt.domain != c.programs[0].domain {
        return Err(SimError::DomainMismatch("ground truth table and coder tables differ".into()));
    }
    Ok(())
}

/// `Σ_π Σ_x p_π p_x 𝟙[π(x) ≠ gt(x)]`.
pub fn exact_pointwise_error<P: Probability>(
    c: &SyntheticCoder<P>,
    g: &SyntheticGen<P>,
    gt: &OutputTable,
    policy: &FloatPolicy,
) -> Result<P, SimError> {
    aligned(c, g, Some(gt))?;
    let mut terms = Vec::new();
    for (prog, pw) in c.programs.iter().zip(&c.weights) {
        for (x, px) in g.probabilities.iter().enumerate() {
            if !outcomes_equal(&prog.outputs[x], &gt.outputs[x], policy) {
                terms.push(pw.clone() * px.clone());
            }
        }
    }
    Ok(P::sum_all(terms))
}

/// `Σ_{π₁,π₂} Σ_x p_π₁ p_π₂ p_x 𝟙[π₁(x) ≠ π₂(x)]`.
pub fn exact_pointwise_incoherence<P: Probability>(
    c: &SyntheticCoder<P>,
    g: &SyntheticGen<P>,
    policy: &FloatPolicy,
) -> Result<P, SimError> {
    aligned(c, g, None)?;
    let mut terms = Vec::new();
    for (a, wa) in c.programs.iter().zip(&c.weights) {
        for (b, wb) in c.programs.iter().zip(&c.weights) {
            for (x, px) in g.probabilities.iter().enumerate() {
                if !outcomes_equal(&a.outputs[x], &b.outputs[x], policy) {
                    terms.push(wa.clone() * wb.clone() * px.clone());
                }
            }
        }
    }
    Ok(P::sum_all(terms))
}

/// `Σ_π p_π 𝟙[π ≠ gt]` with whole-table inequality.
pub fn exact_functional_error<P: Probability>(
    c: &SyntheticCoder<P>,
    gt: &OutputTable,
    policy: &FloatPolicy,
) -> Result<P, SimError> {
    gt_aligned(c, gt)?;
    Ok(P::sum_all(
        c.programs
            .iter()
            .zip(&c.weights)
            .filter(|(p, _)| !p.same_function(gt, policy))
            .map(|(_, w)| w.clone()),
    ))
}

/// `Σ_{π₁,π₂} p_π₁ p_π₂ 𝟙[π₁ ≠ π₂]` with whole-table inequality.
pub fn exact_functional_incoherence<P: Probability>(c: &SyntheticCoder<P>, policy: &FloatPolicy) -> P {
    let mut terms = Vec::new();
    for (a, wa) in c.programs.iter().zip(&c.weights) {
        for (b, wb) in c.programs.iter().zip(&c.weights) {
            if !a.same_function(b, policy) {
                terms.push(wa.clone() * wb.clone());
            }
        }
    }
    P::sum_all(terms)
}

fn weighted_index<P: Probability>(w: &[P]) -> WeightedIndex<f64> {
    WeightedIndex::new(w.iter().map(|x| x.to_f64())).expect("validated weights have positive mass")
}

/// Draws program indices according to the coder's weights.
pub struct TableCoder {
    dist: WeightedIndex<f64>,
}

impl SamplingCoder for TableCoder {
    type Prog = usize;
    fn sample_program<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// Draws input indices according to the gen's probabilities.
pub struct TableGen {
    dist: WeightedIndex<f64>,
}

impl SamplingGen for TableGen {
    type Input = usize;
    fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// Sampling draws weights converted to `f64`; exactness matters only for the
/// enumerated values, not for the draws.
pub fn as_sampling_coder<P: Probability>(c: &SyntheticCoder<P>) -> TableCoder {
    TableCoder {
        dist: weighted_index(&c.weights),
    }
}

pub fn as_sampling_gen<P: Probability>(g: &SyntheticGen<P>) -> TableGen {
    TableGen {
        dist: weighted_index(&g.probabilities),
    }
}

/// Table lookup in place of execution. Program index `programs.len()` is
/// the ground truth, when one is attached.
pub struct TableSemantics<'a> {
    pub programs: &'a [OutputTable],
    pub ground_truth: Option<&'a OutputTable>,
    pub policy: FloatPolicy,
}

impl<'a> TableSemantics<'a> {
    pub fn new<P>(c: &'a SyntheticCoder<P>, ground_truth: Option<&'a OutputTable>) -> Self {
        TableSemantics {
            programs: &c.programs,
            ground_truth,
            policy: FloatPolicy::default(),
        }
    }

    pub fn gt_index(&self) -> usize {
        self.programs.len()
    }

    pub fn table(&self, p: usize) -> &OutputTable {
        if p == self.programs.len() {
            self.ground_truth.expect("ground truth index used without a ground truth")
        } else {
            &self.programs[p]
        }
    }
}

impl Semantics<usize, usize> for TableSemantics<'_> {
    type Out = Outcome;

    fn run(&self, p: &usize, x: &usize) -> Result<Outcome, InfrastructureError> {
        Ok(self.table(*p).outputs[*x].clone())
    }

    fn same(&self, a: &Outcome, b: &Outcome) -> bool {
        outcomes_equal(a, b, &self.policy)
    }
}

/// A coder, an input distribution over the same domain and a ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<P> {
    pub coder: SyntheticCoder<P>,
    pub gen: SyntheticGen<P>,
    pub ground_truth: OutputTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactValues<P> {
    pub pointwise_error: P,
    pub pointwise_incoherence: P,
    pub functional_error: P,
    pub functional_incoherence: P,
}

impl<P: Probability> Instance<P> {
    pub fn new(coder: SyntheticCoder<P>, gen: SyntheticGen<P>, ground_truth: OutputTable) -> Result<Self, SimError> {
        aligned(&coder, &gen, Some(&ground_truth))?;
        Ok(Instance {
            coder,
            gen,
            ground_truth,
        })
    }

    pub fn exact(&self, policy: &FloatPolicy) -> ExactValues<P> {
        ExactValues {
            pointwise_error: exact_pointwise_error(&self.coder, &self.gen, &self.ground_truth, policy)
                .expect("instance domains are aligned"),
            pointwise_incoherence: exact_pointwise_incoherence(&self.coder, &self.gen, policy)
                .expect("instance domains are aligned"),
            functional_error: exact_functional_error(&self.coder, &self.ground_truth, policy)
                .expect("instance domains are aligned"),
            functional_incoherence: exact_functional_incoherence(&self.coder, policy),
        }
    }

    pub fn semantics(&self) -> TableSemantics<'_> {
        TableSemantics::new(&self.coder, Some(&self.ground_truth))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceConfig {
    pub max_programs: usize,
    pub max_inputs: usize,
    /// Outputs are drawn from `0..output_range`; small ranges make
    /// coincidental agreement likely.
    pub output_range: i64,
    pub exception_probability: f64,
    pub max_weight: u64,
    /// Probability that a weight is zero (at least one stays positive).
    pub zero_weight_probability: f64,
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        RandomInstanceConfig {
            max_programs: 8,
            max_inputs: 8,
            output_range: 3,
            exception_probability: 0.1,
            max_weight: 10,
            zero_weight_probability: 0.1,
        }
    }
}

fn random_weights<R: Rng + ?Sized>(k: usize, cfg: &RandomInstanceConfig, rng: &mut R) -> Vec<BigRational> {
    let mut raw: Vec<u64> = (0..k)
        .map(|_| {
            if rng.random_bool(cfg.zero_weight_probability) {
                0
            } else {
                rng.random_range(1..=cfg.max_weight)
            }
        })
        .collect();
    if raw.iter().all(|&w| w == 0) {
        raw[rng.random_range(0..k)] = 1;
    }
    let total: u64 = raw.iter().sum();
    raw.into_iter().map(|w| BigRational::from_ratio(w, total)).collect()
}

fn random_outcome<R: Rng + ?Sized>(cfg: &RandomInstanceConfig, rng: &mut R) -> Outcome {
    if rng.random_bool(cfg.exception_probability) {
        Outcome::exception("synthetic failure")
    } else {
        Outcome::ok(Value::int(rng.random_range(0..cfg.output_range)))
    }
}

fn random_table<R: Rng + ?Sized>(n: usize, cfg: &RandomInstanceConfig, rng: &mut R) -> OutputTable {
    OutputTable {
        domain: int_domain(n),
        outputs: (0..n).map(|_| random_outcome(cfg, rng)).collect(),
    }
}

/// A random instance with rational weights. Some programs are copies of the
/// ground truth so that low-error instances occur.
pub fn random_instance<R: Rng + ?Sized>(cfg: &RandomInstanceConfig, rng: &mut R) -> Instance<BigRational> {
    let k = rng.random_range(1..=cfg.max_programs);
    let n = rng.random_range(1..=cfg.max_inputs);
    let gt = random_table(n, cfg, rng);
    let programs: Vec<OutputTable> = (0..k)
        .map(|_| {
            if rng.random_bool(0.3) {
                gt.clone()
            } else {
                random_table(n, cfg, rng)
            }
        })
        .collect();
    let coder = SyntheticCoder::new(programs, random_weights(k, cfg, rng)).expect("generated coder is valid");
    let gen = SyntheticGen::new(int_domain(n), random_weights(n, cfg, rng)).expect("generated gen is valid");
    Instance::new(coder, gen, gt).expect("generated instance is aligned")
}

/// A random instance whose exact pointwise incoherence is zero: every
/// program agrees on inputs with positive probability, and may differ only
/// on zero-probability inputs.
pub fn random_coherent_instance<R: Rng + ?Sized>(cfg: &RandomInstanceConfig, rng: &mut R) -> Instance<BigRational> {
    let k = rng.random_range(1..=cfg.max_programs);
    let n = rng.random_range(1..=cfg.max_inputs);
    let shared = random_table(n, cfg, rng);
    let gen = SyntheticGen::new(int_domain(n), random_weights(n, cfg, rng)).expect("generated gen is valid");
    let programs: Vec<OutputTable> = (0..k)
        .map(|_| {
            let mut t = shared.clone();
            for (x, p) in gen.probabilities.iter().enumerate() {
                if *p == BigRational::from_ratio(0, 1) && rng.random_bool(0.5) {
                    t.outputs[x] = random_outcome(cfg, rng);
                }
            }
            t
        })
        .collect();
    let coder = SyntheticCoder::new(programs, random_weights(k, cfg, rng)).expect("generated coder is valid");
    let gt = random_table(n, cfg, rng);
    Instance::new(coder, gen, gt).expect("generated instance is aligned")
}

/// Two equiprobable programs that differ on exactly one of two equiprobable
/// inputs; the first equals the ground truth. Pointwise error and
/// incoherence are both 1/4.
pub fn quarter_instance<P: Probability>() -> Instance<P> {
    let gt = OutputTable::from_ints(&[0, 1]);
    let other = OutputTable::from_ints(&[0, 2]);
    let coder = SyntheticCoder::uniform(vec![gt.clone(), other]).expect("valid");
    let gen = SyntheticGen::uniform(int_domain(2)).expect("valid");
    Instance::new(coder, gen, gt).expect("aligned")
}

// ---------------------------------------------------------------------------
// text fixtures

#[derive(Serialize, Deserialize)]
struct FixtureProgram {
    weight: String,
    outputs: Vec<Outcome>,
}

#[derive(Serialize, Deserialize)]
struct Fixture {
    domain: Vec<InputTuple>,
    probabilities: Vec<String>,
    ground_truth: Vec<Outcome>,
    programs: Vec<FixtureProgram>,
}

impl<P: Probability> Instance<P> {
    /// JSON fixture with weights as decimal or `a/b` strings.
    pub fn to_fixture(&self) -> String {
        let f = Fixture {
            domain: self.gen.support.clone(),
            probabilities: self.gen.probabilities.iter().map(|p| p.to_fixture_string()).collect(),
            ground_truth: self.ground_truth.outputs.clone(),
            programs: self
                .coder
                .programs
                .iter()
                .zip(&self.coder.weights)
                .map(|(t, w)| FixtureProgram {
                    weight: w.to_fixture_string(),
                    outputs: t.outputs.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("fixture serializes")
    }

    pub fn from_fixture(text: &str) -> Result<Self, SimError> {
        let f: Fixture = serde_json::from_str(text).map_err(|e| SimError::Fixture(e.to_string()))?;
        let parse = |s: &str| P::parse_fixture(s).ok_or_else(|| SimError::Fixture(format!("bad weight {s:?}")));
        let probabilities = f.probabilities.iter().map(|s| parse(s)).collect::<Result<Vec<P>, _>>()?;
        let weights = f.programs.iter().map(|p| parse(&p.weight)).collect::<Result<Vec<P>, _>>()?;
        let programs = f
            .programs
            .into_iter()
            .map(|p| OutputTable::new(f.domain.clone(), p.outputs))
            .collect::<Result<Vec<_>, _>>()?;
        let gt = OutputTable::new(f.domain.clone(), f.ground_truth)?;
        Instance::new(
            SyntheticCoder::new(programs, weights)?,
            SyntheticGen::new(f.domain, probabilities)?,
            gt,
        )
    }
}

// ---------------------------------------------------------------------------
// self check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Exact inequalities over random instances and PAC frequency checks on
/// the quarter instance, all seeded.
pub fn self_check(instances: usize, runs: usize, seed: u64) -> Vec<CheckLine> {
    use crate::estimators::{detect_incoherence, estimate_incoherence, PacParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let policy = FloatPolicy::default();
    let cfg = RandomInstanceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = BigRational::from_ratio(2, 1);
    let (mut pointwise, mut functional) = (0, 0);
    for _ in 0..instances {
        let v = random_instance(&cfg, &mut rng).exact(&policy);
        pointwise += (v.pointwise_incoherence > two.clone() * v.pointwise_error) as usize;
        functional += (v.functional_incoherence > two.clone() * v.functional_error) as usize;
    }
    let mut lines = vec![
        CheckLine {
            name: "pointwise incoherence <= 2 * pointwise error".into(),
            passed: pointwise == 0,
            detail: format!("{pointwise} violations in {instances} instances"),
        },
        CheckLine {
            name: "functional incoherence <= 2 * functional error".into(),
            passed: functional == 0,
            detail: format!("{functional} violations in {instances} instances"),
        },
    ];

    let inst = quarter_instance::<BigRational>();
    let sem = inst.semantics();
    let coder = as_sampling_coder(&inst.coder);
    let gen = as_sampling_gen(&inst.gen);
    let est = PacParams::new(0.05, 0.05).expect("valid");
    let misses = (0..runs)
        .filter(|_| {
            let r = estimate_incoherence(&coder, &gen, &sem, &est, &mut rng).expect("lookup never fails");
            (r.estimate() - 0.25).abs() > 0.05
        })
        .count();
    lines.push(CheckLine {
        name: "estimation within epsilon".into(),
        passed: misses as f64 <= 0.08 * runs as f64,
        detail: format!("{misses}/{runs} runs off by more than 0.05"),
    });
    let det = PacParams::new(0.1, 0.05).expect("valid");
    let negatives = (0..runs)
        .filter(|_| {
            !detect_incoherence(&coder, &gen, &sem, &det, &mut rng)
                .expect("lookup never fails")
                .detected()
        })
        .count();
    lines.push(CheckLine {
        name: "detection false negatives".into(),
        passed: negatives as f64 <= 0.08 * runs as f64,
        detail: format!("{negatives}/{runs} runs missed a 0.25 incoherence"),
    });
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = BigRational;

    fn q(a: u64, b: u64) -> Q {
        Q::from_ratio(a, b)
    }

    #[test]
    fn quarter_instance_values() {
        let v = quarter_instance::<Q>().exact(&FloatPolicy::default());
        assert_eq!(v.pointwise_error, q(1, 4));
        assert_eq!(v.pointwise_incoherence, q(1, 4));
        assert_eq!(v.functional_error, q(1, 2));
        assert_eq!(v.functional_incoherence, q(1, 2));
    }

    #[test]
    fn three_programs_two_identical() {
        let a = OutputTable::from_ints(&[1, 2]);
        let b = OutputTable::from_ints(&[1, 3]);
        let c = SyntheticCoder::<Q>::uniform(vec![a.clone(), a, b]).unwrap();
        assert_eq!(exact_functional_incoherence(&c, &FloatPolicy::default()), q(4, 9));
    }

    #[test]
    fn everywhere_different_pair() {
        let c = SyntheticCoder::<Q>::uniform(vec![OutputTable::from_ints(&[0, 0]), OutputTable::from_ints(&[1, 1])]).unwrap();
        let g = SyntheticGen::uniform(int_domain(2)).unwrap();
        let p = FloatPolicy::default();
        assert_eq!(exact_pointwise_incoherence(&c, &g, &p).unwrap(), q(1, 2));
        let wrong = OutputTable::from_ints(&[5, 5]);
        assert_eq!(exact_pointwise_error(&c, &g, &wrong, &p).unwrap(), q(1, 1));
    }

    #[test]
    fn misaligned_domains_are_rejected() {
        let c = SyntheticCoder::<Q>::uniform(vec![OutputTable::from_ints(&[0, 0])]).unwrap();
        let g = SyntheticGen::uniform(int_domain(3)).unwrap();
        assert!(exact_pointwise_incoherence(&c, &g, &FloatPolicy::default()).is_err());
        assert!(SyntheticCoder::<Q>::uniform(vec![OutputTable::from_ints(&[0]), OutputTable::from_ints(&[0, 1])]).is_err());
        assert!(SyntheticCoder::new(vec![OutputTable::from_ints(&[0])], vec![q(1, 2)]).is_err());
    }

    #[test]
    fn float_weights_work() {
        let v = quarter_instance::<f64>().exact(&FloatPolicy::default());
        assert!((v.pointwise_incoherence - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fixture_roundtrip() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..20 {
            let inst = random_instance(&RandomInstanceConfig::default(), &mut rng);
            let text = inst.to_fixture();
            assert_eq!(Instance::<Q>::from_fixture(&text).unwrap(), inst);
        }
    }

    #[test]
    fn coherent_instances_are_coherent() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(8);
        for _ in 0..50 {
            let v = random_coherent_instance(&RandomInstanceConfig::default(), &mut rng).exact(&FloatPolicy::default());
            assert_eq!(v.pointwise_incoherence, q(0, 1));
        }
    }
}
