// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction for delays and areas.
//!
//! Timing, area and library code is generic over [`Scalar`], with
//! implementations for `f32`, `f64` and the exact [`Rational`] type. Exact
//! arithmetic is useful when tie-breaking or monotonicity must hold without
//! any rounding slack.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Exact rational scalar.
pub type Rational = Ratio<i64>;

/// Numeric type used for delays (ns) and areas (µm²).
pub trait Scalar:
    Copy
    + Num
    + PartialOrd
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts a decimal literal read from a config file.
    ///
    /// Rational implementations parse the shortest decimal rendering of `x`,
    /// so `0.07` becomes exactly `7/100`.
    fn from_decimal(x: f64) -> Self;

    /// Builds `num / den` exactly where the type allows it.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer fits scalar") / Self::from_i64(den).expect("integer fits scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn from_decimal(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    fn from_decimal(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for Rational {
    fn from_decimal(x: f64) -> Self {
        decimal_to_ratio(x)
    }
}

fn decimal_to_ratio(x: f64) -> Rational {
    // `{:?}` prints the shortest string that round-trips, e.g. "0.07" or "1e-5".
    let text = format!("{x:?}");
    let (mantissa, exp) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().unwrap_or(0)),
        None => (text.as_str(), 0),
    };
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches('-');
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    let mut num: i64 = digits.parse().unwrap_or(0);
    let mut scale = frac_part.len() as i32 - exp;
    while scale < 0 {
        num *= 10;
        scale += 1;
    }
    let den = 10i64.pow(scale as u32);
    let r = Ratio::new(num, den);
    if negative {
        -r
    } else {
        r
    }
}

/// Largest element of a non-empty iterator under `PartialOrd`.
pub fn max_scalar<T: Scalar>(iter: impl IntoIterator<Item = T>) -> Option<T> {
    iter.into_iter().reduce(|a, b| a.max_of(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(Rational::from_decimal(0.07), Ratio::new(7, 100));
        assert_eq!(Rational::from_decimal(13190.04), Ratio::new(1319004, 100));
        assert_eq!(Rational::from_decimal(-2.5), Ratio::new(-5, 2));
        assert_eq!(Rational::from_decimal(3.0), Ratio::from_integer(3));
        assert_eq!(Rational::from_decimal(1e-5), Ratio::new(1, 100_000));
    }

    #[test]
    fn ratio_helper() {
        assert_eq!(<f64 as Scalar>::ratio(7, 100), 0.07);
        assert_eq!(<Rational as Scalar>::ratio(7, 100), Ratio::new(7, 100));
    }
}
