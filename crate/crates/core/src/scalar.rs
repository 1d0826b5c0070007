//! Scalar abstraction for probabilities, rates and means.
//!
//! Everything that sums probability mass or divides counts is written against
//! [`Probability`], so the same code runs in `f32`, `f64`, or exact
//! [`BigRational`] arithmetic. Floating implementations sum with Neumaier
//! compensation; the rational implementation is exact.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive};

/// Tolerance used by floating scalars when checking that a weight vector is
/// normalized.
pub const FLOAT_UNIT_SUM_TOLERANCE: f64 = 1e-12;

pub trait Probability: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`. `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// Converts a finite float. Rationals convert exactly.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    /// True when arithmetic in this scalar carries no rounding error.
    fn is_exact() -> bool;

    /// Sum of an iterator. Floats use compensated summation.
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }

    /// Whether `total` counts as 1 for weight validation.
    fn is_unit(total: &Self) -> bool;

    fn to_fixture_string(&self) -> String;

    fn parse_fixture(text: &str) -> Option<Self>;

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

fn neumaier<F, I>(iter: I) -> F
where
    F: num_traits::Float,
    I: IntoIterator<Item = F>,
{
    let mut sum = F::zero();
    let mut comp = F::zero();
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

impl Probability for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_exact() -> bool {
        false
    }

    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }

    fn is_unit(total: &Self) -> bool {
        (total - 1.0).abs() <= FLOAT_UNIT_SUM_TOLERANCE
    }

    fn to_fixture_string(&self) -> String {
        format!("{self:?}")
    }

    fn parse_fixture(text: &str) -> Option<Self> {
        text.trim().parse().ok().filter(|x: &f64| x.is_finite())
    }
}

impl Probability for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_f64(x: f64) -> Option<Self> {
        let y = x as f32;
        y.is_finite().then_some(y)
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn is_exact() -> bool {
        false
    }

    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }

    fn is_unit(total: &Self) -> bool {
        (total - 1.0).abs() as f64 <= f32::EPSILON as f64 * 16.0
    }

    fn to_fixture_string(&self) -> String {
        format!("{self:?}")
    }

    fn parse_fixture(text: &str) -> Option<Self> {
        text.trim().parse().ok().filter(|x: &f32| x.is_finite())
    }
}

impl Probability for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }

    fn is_unit(total: &Self) -> bool {
        total.is_one()
    }

    fn to_fixture_string(&self) -> String {
        self.to_string()
    }

    fn parse_fixture(text: &str) -> Option<Self> {
        let r: BigRational = text.trim().parse().ok()?;
        Some(r)
    }
}
