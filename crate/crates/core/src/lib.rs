//! Oracle-free evaluation of generated programs by measuring how often
//! independently sampled candidates disagree.
//!
//! The pipeline is: fetch `m` candidates per task ([`coderstore`]), fuzz `n`
//! inputs from the task's seeds ([`inputgen`]), execute through language
//! shims with caching ([`runner`]), estimate error and incoherence
//! ([`estimators`]) and aggregate ([`metrics`]). [`simulator`] provides
//! finite coders whose exact values serve as test oracles.
//!
//! Probabilistic code is generic over [`scalar::Probability`]; the aliases
//! below fix the common choices.

pub mod campaign;
pub mod coderstore;
pub mod estimators;
pub mod import;
pub mod inputgen;
pub mod metrics;
pub mod runner;
pub mod scalar;
pub mod simulator;
pub mod task;
pub mod toy;
pub mod value;

pub use estimators::{PacParams, TaskStats};
pub use runner::{Outcome, Program, Status};
pub use scalar::Probability;
pub use task::{Benchmark, Task};
pub use value::{FloatPolicy, InputTuple, Value};

/// Exact rational probabilities.
pub type Exact = num_rational::BigRational;

pub type ExactCoder = simulator::SyntheticCoder<Exact>;
pub type ExactGen = simulator::SyntheticGen<Exact>;
pub type ExactInstance = simulator::Instance<Exact>;

pub type FloatCoder = simulator::SyntheticCoder<f64>;
pub type FloatGen = simulator::SyntheticGen<f64>;
pub type FloatInstance = simulator::Instance<f64>;

pub type Float32Coder = simulator::SyntheticCoder<f32>;
pub type Float32Instance = simulator::Instance<f32>;
