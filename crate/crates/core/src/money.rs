//! Exact fixed-point currency.
//!
//! Every amount is an integer count of micro-units (`10^-6` of one currency
//! unit). Sums, differences, integer multiples and comparisons are exact;
//! division appears only where the result is known to be integral (a VBG bid
//! split evenly among its members) and is checked.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

/// Number of fractional decimal digits carried by every amount.
pub const DECIMALS: u32 = 6;
/// Micro-units per currency unit.
pub const SCALE: i128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("empty number")]
    Empty,
    #[error("invalid decimal `{0}`")]
    Syntax(String),
    #[error("`{0}` has more than {DECIMALS} fractional digits")]
    TooPrecise(String),
    #[error("`{0}` is out of range")]
    Overflow(String),
    #[error("`{0}` is negative")]
    Negative(String),
}

/// Parses a plain decimal (`12`, `0.25`, `-3.5`) into micro-units.
pub fn parse_micros(text: &str) -> Result<i128, AmountError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(AmountError::Empty);
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, f),
        None => (digits, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(AmountError::Syntax(s.to_string()));
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(AmountError::Syntax(s.to_string()));
    }
    if frac.len() > DECIMALS as usize {
        // Trailing zeros beyond the scale are harmless.
        if frac[DECIMALS as usize..].bytes().any(|b| b != b'0') {
            return Err(AmountError::TooPrecise(s.to_string()));
        }
    }
    let overflow = || AmountError::Overflow(s.to_string());
    let mut value: i128 = 0;
    for b in whole.bytes() {
        value = value.checked_mul(10).and_then(|v| v.checked_add(i128::from(b - b'0'))).ok_or_else(overflow)?;
    }
    value = value.checked_mul(SCALE).ok_or_else(overflow)?;
    let mut frac_value: i128 = 0;
    for i in 0..DECIMALS as usize {
        let digit = frac.as_bytes().get(i).map_or(0, |b| i128::from(b - b'0'));
        frac_value = frac_value * 10 + digit;
    }
    value = value.checked_add(frac_value).ok_or_else(overflow)?;
    Ok(if negative { -value } else { value })
}

/// Canonical decimal text: no trailing fractional zeros, no `.` for whole
/// numbers, `-` only for negative values.
pub fn format_micros(micros: i128) -> String {
    let sign = if micros < 0 { "-" } else { "" };
    let abs = micros.unsigned_abs();
    let scale = SCALE as u128;
    let whole = abs / scale;
    let frac = abs % scale;
    if frac == 0 {
        return format!("{sign}{whole}");
    }
    let mut frac_text = format!("{frac:0width$}", width = DECIMALS as usize);
    while frac_text.ends_with('0') {
        frac_text.pop();
    }
    format!("{sign}{whole}.{frac_text}")
}

/// A non-negative amount of currency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_micros(micros: i128) -> Option<Money> {
        (micros >= 0).then_some(Money(micros))
    }

    /// Whole currency units.
    pub const fn from_units(units: u64) -> Money {
        Money(units as i128 * SCALE)
    }

    pub fn micros(self) -> i128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn signed(self) -> SignedMoney {
        SignedMoney(self.0)
    }

    pub fn times(self, count: u64) -> Money {
        Money(self.0 * i128::from(count))
    }

    /// Exact division by a positive integer; `None` if it would round.
    pub fn checked_div_exact(self, count: u64) -> Option<Money> {
        let d = i128::from(count);
        if d == 0 || self.0 % d != 0 {
            return None;
        }
        Some(Money(self.0 / d))
    }

    pub fn checked_sub(self, other: Money) -> Option<Money> {
        Money::from_micros(self.0 - other.0)
    }

    pub fn to_rational(self) -> BigRational {
        micros_to_rational(self.0)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_micros(self.0))
    }
}

impl FromStr for Money {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let micros = parse_micros(s)?;
        Money::from_micros(micros).ok_or_else(|| AmountError::Negative(s.trim().to_string()))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for Money {
    type Output = Money;
    fn mul(self, rhs: u64) -> Money {
        self.times(rhs)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

/// An amount that may be negative: utilities, welfare, auctioneer profit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedMoney(i128);

impl SignedMoney {
    pub const ZERO: SignedMoney = SignedMoney(0);

    pub fn from_micros(micros: i128) -> SignedMoney {
        SignedMoney(micros)
    }

    pub fn micros(self) -> i128 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn times(self, count: i64) -> SignedMoney {
        SignedMoney(self.0 * i128::from(count))
    }

    pub fn to_rational(self) -> BigRational {
        micros_to_rational(self.0)
    }
}

impl From<Money> for SignedMoney {
    fn from(m: Money) -> SignedMoney {
        m.signed()
    }
}

impl fmt::Display for SignedMoney {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_micros(self.0))
    }
}

impl FromStr for SignedMoney {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_micros(s).map(SignedMoney)
    }
}

impl Add for SignedMoney {
    type Output = SignedMoney;
    fn add(self, rhs: SignedMoney) -> SignedMoney {
        SignedMoney(self.0 + rhs.0)
    }
}

impl AddAssign for SignedMoney {
    fn add_assign(&mut self, rhs: SignedMoney) {
        self.0 += rhs.0;
    }
}

impl Sub for SignedMoney {
    type Output = SignedMoney;
    fn sub(self, rhs: SignedMoney) -> SignedMoney {
        SignedMoney(self.0 - rhs.0)
    }
}

impl Neg for SignedMoney {
    type Output = SignedMoney;
    fn neg(self) -> SignedMoney {
        SignedMoney(-self.0)
    }
}

impl Sum for SignedMoney {
    fn sum<I: Iterator<Item = SignedMoney>>(iter: I) -> SignedMoney {
        iter.fold(SignedMoney::ZERO, Add::add)
    }
}

fn micros_to_rational(micros: i128) -> BigRational {
    BigRational::new(BigInt::from(micros), BigInt::from(SCALE))
}

/// Renders a rational as a decimal rounded half away from zero to `places`
/// fractional digits.
pub fn format_rational(value: &BigRational, places: u32) -> String {
    use num_integer::Integer;
    use num_traits::{Signed, Zero};

    let scale = BigInt::from(10u32).pow(places);
    let scaled = value * BigRational::from_integer(scale.clone());
    let negative = scaled.is_negative();
    let abs = scaled.abs();
    let (q, r) = abs.numer().div_rem(abs.denom());
    let twice = r * 2u32;
    let rounded = if &twice >= abs.denom() { q + 1u32 } else { q };
    let (whole, frac) = rounded.div_rem(&scale);
    let sign = if negative && !(whole.is_zero() && frac.is_zero()) { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{whole}");
    }
    format!("{sign}{whole}.{frac:0width$}", width = places as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_formats_canonically() {
        assert_eq!(parse_micros("3").unwrap(), 3_000_000);
        assert_eq!(parse_micros("0.5").unwrap(), 500_000);
        assert_eq!(parse_micros(".25").unwrap(), 250_000);
        assert_eq!(parse_micros("-1.000001").unwrap(), -1_000_001);
        assert_eq!(parse_micros("2.5000000").unwrap(), 2_500_000);
        assert_eq!(format_micros(2_500_000), "2.5");
        assert_eq!(format_micros(-1), "-0.000001");
        assert_eq!(format_micros(0), "0");
    }

    #[test]
    fn rejects_bad_decimals() {
        assert!(matches!(parse_micros(""), Err(AmountError::Empty)));
        assert!(matches!(parse_micros("1.0000001"), Err(AmountError::TooPrecise(_))));
        assert!(matches!(parse_micros("1e3"), Err(AmountError::Syntax(_))));
        assert!(matches!(parse_micros("."), Err(AmountError::Syntax(_))));
        assert!(matches!("-2".parse::<Money>(), Err(AmountError::Negative(_))));
        assert!(parse_micros("999999999999999999999999999999999999").is_err());
    }

    #[test]
    fn exact_division_only_when_integral() {
        let nine = Money::from_units(9);
        assert_eq!(nine.checked_div_exact(3), Some(Money::from_units(3)));
        assert_eq!(Money::from_micros(10).unwrap().checked_div_exact(3), None);
        assert_eq!(nine.checked_div_exact(0), None);
    }

    #[test]
    fn rational_rendering_rounds_half_away() {
        let r = BigRational::new(82.into(), 6.into());
        assert_eq!(format_rational(&r, 4), "13.6667");
        let r = BigRational::new((-1).into(), 8.into());
        assert_eq!(format_rational(&r, 2), "-0.13");
        let r = BigRational::new((-1).into(), 1000.into());
        assert_eq!(format_rational(&r, 2), "0.00");
    }

    #[test]
    fn associativity_and_integer_scaling_on_many_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let a = SignedMoney::from_micros(rng.gen_range(-10i128.pow(15)..10i128.pow(15)));
            let b = SignedMoney::from_micros(rng.gen_range(-10i128.pow(15)..10i128.pow(15)));
            let c = SignedMoney::from_micros(rng.gen_range(-10i128.pow(15)..10i128.pow(15)));
            let k: i64 = rng.gen_range(-1000..1000);
            assert_eq!((a + b) + c, a + (b + c));
            assert_eq!((a + b) - b, a);
            assert_eq!(a.times(k).to_rational(), a.to_rational() * BigRational::from_integer(k.into()));
        }
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(micros in -10i128.pow(20)..10i128.pow(20)) {
            prop_assert_eq!(parse_micros(&format_micros(micros)).unwrap(), micros);
        }
    }
}
