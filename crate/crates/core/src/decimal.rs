//! Fixed-precision decimal arithmetic used for every price computation.
//!
//! Values carry at most [`PRECISION`] significant digits; every arithmetic
//! result is rounded half-even back to that precision, so results are
//! bit-reproducible on every platform.

use std::fmt;
use std::iter::Sum;
use std::num::NonZeroU64;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use bigdecimal::{BigDecimal, RoundingMode};
use num_bigint::{BigInt, Sign};
use num_traits::{ToPrimitive, Zero};

/// Significant digits retained after every operation.
pub const PRECISION: u64 = 50;

#[derive(Debug, thiserror::Error)]
#[error("invalid decimal literal {0:?}")]
pub struct ParseDecError(pub String);

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dec(BigDecimal);

fn round(value: BigDecimal) -> Dec {
    if value.digits() > PRECISION {
        let prec = NonZeroU64::new(PRECISION).expect("nonzero precision");
        Dec(value.with_precision_round(prec, RoundingMode::HalfEven))
    } else {
        Dec(value)
    }
}

impl Dec {
    pub fn zero() -> Self {
        Dec(BigDecimal::zero())
    }

    pub fn one() -> Self {
        Dec::from_u128(1)
    }

    pub fn from_u128(v: u128) -> Self {
        Dec(BigDecimal::new(BigInt::from(v), 0))
    }

    pub fn from_i64(v: i64) -> Self {
        Dec(BigDecimal::new(BigInt::from(v), 0))
    }

    /// `raw / 10^decimals`, exact.
    pub fn from_raw(raw: u128, decimals: u8) -> Self {
        Dec(BigDecimal::new(BigInt::from(raw), decimals as i64))
    }

    /// `10^exp` for any signed exponent, exact.
    pub fn pow10(exp: i64) -> Self {
        Dec(BigDecimal::new(BigInt::from(1u8), -exp))
    }

    /// Converts through the shortest round-trip representation of `v`,
    /// so `Dec::from_f64(0.95)` is exactly `0.95`.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        format!("{v}").parse().ok()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.sign() == Sign::Plus
    }

    pub fn is_negative(&self) -> bool {
        self.0.sign() == Sign::Minus
    }

    pub fn abs(&self) -> Self {
        Dec(self.0.abs())
    }

    pub fn checked_div(&self, rhs: &Dec) -> Option<Dec> {
        if rhs.is_zero() {
            None
        } else {
            Some(round(&self.0 / &rhs.0))
        }
    }

    pub fn sqrt(&self) -> Option<Dec> {
        self.0.sqrt().map(round)
    }

    /// Largest integer not above `self`, if it fits a `u128`.
    pub fn floor_u128(&self) -> Option<u128> {
        let (int, _) = self
            .0
            .with_scale_round(0, RoundingMode::Floor)
            .into_bigint_and_exponent();
        int.to_u128()
    }

    /// Half-even rounding to `dp` fractional digits, rendered without exponent.
    pub fn to_fixed(&self, dp: u32) -> String {
        let s = self
            .0
            .with_scale_round(dp as i64, RoundingMode::HalfEven)
            .to_plain_string();
        // "-0.0000" would make output depend on the sign of a rounded-away value
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    }

    pub fn min(self, other: Dec) -> Dec {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Dec) -> Dec {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Canonical form: plain notation, no trailing fractional zeros.
impl fmt::Display for Dec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_zero() {
            return f.write_str("0");
        }
        let plain = self.0.normalized().to_plain_string();
        f.write_str(&plain)
    }
}

impl FromStr for Dec {
    type Err = ParseDecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("nan") || t.contains("inf") {
            return Err(ParseDecError(s.to_string()));
        }
        BigDecimal::from_str(t)
            .map(round)
            .map_err(|_| ParseDecError(s.to_string()))
    }
}

impl serde::Serialize for Dec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Dec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<Dec> for Dec {
            type Output = Dec;
            fn $method(self, rhs: Dec) -> Dec {
                round(self.0 $op rhs.0)
            }
        }
        impl<'a> $tr<&'a Dec> for Dec {
            type Output = Dec;
            fn $method(self, rhs: &'a Dec) -> Dec {
                round(self.0 $op &rhs.0)
            }
        }
        impl<'a> $tr<Dec> for &'a Dec {
            type Output = Dec;
            fn $method(self, rhs: Dec) -> Dec {
                round(&self.0 $op rhs.0)
            }
        }
        impl<'a, 'b> $tr<&'b Dec> for &'a Dec {
            type Output = Dec;
            fn $method(self, rhs: &'b Dec) -> Dec {
                round(&self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

// Panics on a zero divisor like the primitive types; use `checked_div` when
// the divisor is data-dependent.
impl Div<Dec> for Dec {
    type Output = Dec;
    fn div(self, rhs: Dec) -> Dec {
        self.checked_div(&rhs).expect("decimal division by zero")
    }
}

impl<'a> Div<&'a Dec> for Dec {
    type Output = Dec;
    fn div(self, rhs: &'a Dec) -> Dec {
        self.checked_div(rhs).expect("decimal division by zero")
    }
}

impl Div<Dec> for &Dec {
    type Output = Dec;
    fn div(self, rhs: Dec) -> Dec {
        self.checked_div(&rhs).expect("decimal division by zero")
    }
}

impl<'b> Div<&'b Dec> for &Dec {
    type Output = Dec;
    fn div(self, rhs: &'b Dec) -> Dec {
        self.checked_div(rhs).expect("decimal division by zero")
    }
}

impl Neg for Dec {
    type Output = Dec;
    fn neg(self) -> Dec {
        Dec(-self.0)
    }
}

impl Neg for &Dec {
    type Output = Dec;
    fn neg(self) -> Dec {
        Dec(-&self.0)
    }
}

impl Sum for Dec {
    fn sum<I: Iterator<Item = Dec>>(iter: I) -> Dec {
        iter.fold(Dec::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Dec> for Dec {
    fn sum<I: Iterator<Item = &'a Dec>>(iter: I) -> Dec {
        iter.fold(Dec::zero(), |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dec {
        s.parse().unwrap()
    }

    #[test]
    fn raw_conversion_is_exact() {
        assert_eq!(Dec::from_raw(1_500_000, 6), d("1.5"));
        assert_eq!(Dec::from_raw(u128::MAX, 36).to_string().len(), 40);
    }

    #[test]
    fn division_rounds_half_even_at_precision() {
        let third = Dec::one() / Dec::from_u128(3);
        let s = third.to_string();
        assert_eq!(s.len(), 2 + PRECISION as usize);
        assert!(s.ends_with('3'));
        let two_thirds = Dec::from_u128(2) / Dec::from_u128(3);
        assert!(two_thirds.to_string().ends_with('7'));
    }

    #[test]
    fn fixed_formatting_half_even() {
        assert_eq!(d("0.00005").to_fixed(4), "0.0000");
        assert_eq!(d("0.00015").to_fixed(4), "0.0002");
        assert_eq!(d("-0.00001").to_fixed(4), "0.0000");
        assert_eq!(d("5").to_fixed(4), "5.0000");
    }

    #[test]
    fn canonical_display() {
        assert_eq!(d("1.2300").to_string(), "1.23");
        assert_eq!(d("1e3").to_string(), "1000");
        assert_eq!(d("0.000").to_string(), "0");
        assert_eq!(Dec::pow10(-18).to_string(), "0.000000000000000001");
    }

    #[test]
    fn from_f64_uses_shortest_repr() {
        assert_eq!(Dec::from_f64(0.95).unwrap(), d("0.95"));
        assert!(Dec::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn floor_to_integer() {
        assert_eq!(d("12.999").floor_u128(), Some(12));
        assert_eq!(d("-0.5").floor_u128(), None);
    }
}
