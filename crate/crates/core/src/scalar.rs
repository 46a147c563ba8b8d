//! Numeric abstraction shared by every scoring routine.
//!
//! Strengths, overlaps, path scores and metrics are all ratios of small
//! quantities, so the same code runs over `f32`, `f64` and exact rationals.
//! Exact rationals are used by the test suite to assert scoring identities
//! without tolerances.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Exact rational scalar.
pub type Rational = Ratio<i64>;

/// A real-valued score type.
pub trait Scalar:
    Num + Copy + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts a decimal value. Returns `None` for non-finite input or when the
    /// value is not representable.
    fn from_f64(x: f64) -> Option<Self>;

    fn to_f64(self) -> f64;

    fn from_count(n: usize) -> Self;

    /// Smallest integer `>= self`, for non-negative values.
    fn ceil_count(self) -> usize;

    /// Quotient of two counts.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    /// Whether `self` lies in the closed unit interval.
    fn in_unit_interval(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_f64(x: f64) -> Option<Self> {
                x.is_finite().then_some(x as $t)
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn from_count(n: usize) -> Self {
                n as $t
            }

            fn ceil_count(self) -> usize {
                self.ceil().max(0.0) as usize
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Rational {
    /// Goes through the shortest round-trip decimal form, so `0.9` becomes
    /// exactly `9/10` rather than the binary approximation.
    fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let text = format!("{x}");
        let (negative, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.as_str()),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        let mut numer: i64 = 0;
        let mut denom: i64 = 1;
        for c in int_part.chars().chain(frac_part.chars()) {
            numer = numer.checked_mul(10)?.checked_add(c.to_digit(10)? as i64)?;
        }
        for _ in 0..frac_part.len() {
            denom = denom.checked_mul(10)?;
        }
        let value = Ratio::new(numer, denom);
        Some(if negative { -value } else { value })
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }

    fn ceil_count(self) -> usize {
        self.ceil().to_integer().max(0) as usize
    }
}

/// Converts a configuration value, mapping failure to a validation error.
pub(crate) fn convert<S: Scalar>(x: f64, what: &str) -> crate::Result<S> {
    S::from_f64(x)
        .ok_or_else(|| crate::Error::validation(format!("{what}: {x} is not representable")))
}
