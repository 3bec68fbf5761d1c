//! Exact decimal money arithmetic.
//!
//! Money is stored as integer micro-units (10^-6 of one money unit) so that
//! cost totals add up bit-for-bit. Values serialize as decimal strings, never
//! as binary floats.

use alloc::string::String;
use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign, Sub};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Micro-units per whole money unit.
pub const MICROS_PER_UNIT: i64 = 1_000_000;

/// An exact decimal money amount with six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Money {
        Money(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, rhs: Money) -> Option<Money> {
        self.0.checked_add(rhs.0).map(Money)
    }

    /// Parses a decimal string such as `"212"`, `"0.02"`, or `"-1.5"`.
    /// At most six fractional digits are accepted.
    pub fn parse(text: &str) -> Result<Money, MoneyParseError> {
        let (negative, rest) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = match rest.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (rest, None),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(MoneyParseError::BadDigits);
        }
        let mut micros = int_part
            .parse::<i64>()
            .map_err(|_| MoneyParseError::Overflow)?
            .checked_mul(MICROS_PER_UNIT)
            .ok_or(MoneyParseError::Overflow)?;
        if let Some(frac) = frac_part {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(MoneyParseError::BadDigits);
            }
            if frac.len() > 6 {
                return Err(MoneyParseError::TooPrecise);
            }
            let mut value = frac.parse::<i64>().map_err(|_| MoneyParseError::Overflow)?;
            for _ in frac.len()..6 {
                value *= 10;
            }
            micros = micros.checked_add(value).ok_or(MoneyParseError::Overflow)?;
        }
        Ok(Money(if negative { -micros } else { micros }))
    }

    /// Lossy conversion to a floating value in whole money units,
    /// for percentage reporting only.
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(rhs.0).expect("money overflow"))
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0.checked_sub(rhs.0).expect("money overflow"))
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_UNIT as u64;
        let frac = abs % MICROS_PER_UNIT as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let mut digits = 6;
            let mut frac = frac;
            while frac % 10 == 0 {
                frac /= 10;
                digits -= 1;
            }
            write!(f, "{sign}{whole}.{frac:0width$}", width = digits)
        }
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Money, D::Error> {
        struct MoneyVisitor;
        impl Visitor<'_> for MoneyVisitor {
            type Value = Money;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal money string such as \"0.02\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Money, E> {
                Money::parse(v).map_err(|e| E::custom(e))
            }
        }
        deserializer.deserialize_str(MoneyVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoneyParseError {
    BadDigits,
    TooPrecise,
    Overflow,
}

impl fmt::Display for MoneyParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoneyParseError::BadDigits => f.write_str("money must be decimal digits with an optional sign and fraction"),
            MoneyParseError::TooPrecise => f.write_str("money supports at most six fractional digits"),
            MoneyParseError::Overflow => f.write_str("money value out of range"),
        }
    }
}

/// Floor charge for moving or processing `bytes` at a per-GB rate.
/// 1 GB = 10^9 bytes; the truncated remainder is below one micro-unit.
pub(crate) fn charge(rate: Money, bytes: u64) -> Money {
    Money::from_micros((charge_exact(rate, bytes) / 1_000_000_000) as i64)
}

/// Exact charge numerator in micro-unit-bytes (denominator 10^9).
/// Plan comparisons use these so that rounding never affects an argmin.
pub(crate) fn charge_exact(rate: Money, bytes: u64) -> u128 {
    debug_assert!(!rate.is_negative());
    rate.micros() as u128 * bytes as u128
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parses_and_formats_round_trip() {
        for text in ["0", "212", "0.02", "0.000001", "17.5", "-3.25", "172.356"] {
            let m = Money::parse(text).unwrap();
            assert_eq!(m.to_string(), text);
        }
        assert_eq!(Money::parse("0.500000").unwrap().to_string(), "0.5");
        assert_eq!(Money::parse("5.").is_err(), true);
        assert!(Money::parse("0.0000001").is_err());
        assert!(Money::parse("1e3").is_err());
        assert!(Money::parse("").is_err());
    }

    #[test]
    fn addition_is_exact() {
        let a = Money::parse("0.1").unwrap();
        let b = Money::parse("0.2").unwrap();
        assert_eq!(a + b, Money::parse("0.3").unwrap());
    }

    #[test]
    fn charge_is_rate_times_gigabytes() {
        // 100 GB at 0.02/GB -> 2.00
        let rate = Money::parse("0.02").unwrap();
        assert_eq!(charge(rate, 100_000_000_000), Money::parse("2").unwrap());
        // zero volume
        assert_eq!(charge(rate, 0), Money::ZERO);
        // sub-GB volumes floor toward zero micro-units
        assert_eq!(charge(Money::parse("1").unwrap(), 1), Money::ZERO);
    }
}
