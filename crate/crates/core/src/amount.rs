//! Integer satoshi amounts and exact rational rounding.
//!
//! Every monetary value in the pipeline is an [`Amount`]: a count of
//! satoshis held in a `u64`. Decimal BTC strings coming from node JSON are
//! converted digit by digit; no floating-point value is ever involved.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use thiserror::Error;

/// Satoshis per BTC.
pub const COIN: u64 = 100_000_000;

/// Maximum number of fraction digits a BTC decimal may carry.
pub const BTC_DECIMALS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmountError {
    #[error("empty amount string")]
    Empty,
    #[error("invalid character {0:?} in amount {1:?}")]
    InvalidChar(char, String),
    #[error("amount {0:?} has more than {BTC_DECIMALS} fraction digits")]
    Precision(String),
    #[error("amount {0:?} is negative")]
    Negative(String),
    #[error("amount {0:?} overflows 64-bit satoshis")]
    Overflow(String),
}

/// A non-negative amount of satoshis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const ONE_SAT: Amount = Amount(1);

    pub const fn from_sat(sat: u64) -> Self {
        Amount(sat)
    }

    pub const fn to_sat(self) -> u64 {
        self.0
    }

    /// Parses a decimal BTC string (`"34.93"`, `"0.00000001"`, `"50"`).
    pub fn from_btc_str(s: &str) -> Result<Self, AmountError> {
        if s.is_empty() {
            return Err(AmountError::Empty);
        }
        if s.starts_with('-') {
            return Err(AmountError::Negative(s.to_owned()));
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (s, None),
        };
        if int_part.is_empty() {
            return Err(AmountError::InvalidChar('.', s.to_owned()));
        }
        let overflow = || AmountError::Overflow(s.to_owned());
        let mut sat: u64 = 0;
        for c in int_part.chars() {
            let d = c
                .to_digit(10)
                .ok_or_else(|| AmountError::InvalidChar(c, s.to_owned()))?;
            sat = sat
                .checked_mul(10)
                .and_then(|v| v.checked_add(d as u64))
                .ok_or_else(overflow)?;
        }
        sat = sat.checked_mul(COIN).ok_or_else(overflow)?;
        if let Some(frac) = frac_part {
            if frac.is_empty() {
                return Err(AmountError::InvalidChar('.', s.to_owned()));
            }
            if frac.len() > BTC_DECIMALS {
                if let Some(c) = frac.chars().find(|c| !c.is_ascii_digit()) {
                    return Err(AmountError::InvalidChar(c, s.to_owned()));
                }
                return Err(AmountError::Precision(s.to_owned()));
            }
            let mut scale = COIN;
            for c in frac.chars() {
                let d = c
                    .to_digit(10)
                    .ok_or_else(|| AmountError::InvalidChar(c, s.to_owned()))?;
                scale /= 10;
                sat = sat.checked_add(d as u64 * scale).ok_or_else(overflow)?;
            }
        }
        Ok(Amount(sat))
    }

    /// Canonical BTC rendering with exactly eight fraction digits.
    pub fn to_btc_string(self) -> String {
        format!("{}.{:08}", self.0 / COIN, self.0 % COIN)
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} sat", self.0)
    }
}

impl FromStr for Amount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Amount::from_btc_str(s)
    }
}

impl std::iter::Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Self {
        Amount(iter.map(|a| a.0).sum())
    }
}

/// Rounds `numer / denom` to the nearest integer, ties away from zero.
///
/// Panics if `denom` is zero.
pub fn round_half_away_from_zero(numer: i128, denom: i128) -> i128 {
    assert!(denom != 0, "rational with zero denominator");
    let negative = (numer < 0) != (denom < 0);
    let n = numer.unsigned_abs();
    let d = denom.unsigned_abs();
    let q = n / d;
    let r = n % d;
    // r >= d - r  <=>  fractional part >= 1/2
    let mag = if r >= d - r { q + 1 } else { q };
    let mag = mag as i128;
    if negative {
        -mag
    } else {
        mag
    }
}

/// Same as [`round_half_away_from_zero`] for arbitrary-size integers.
pub fn round_half_away_from_zero_big(numer: &BigInt, denom: &BigInt) -> BigInt {
    assert!(denom.sign() != Sign::NoSign, "rational with zero denominator");
    let negative = (numer.sign() == Sign::Minus) != (denom.sign() == Sign::Minus);
    let n = numer.magnitude();
    let d = denom.magnitude();
    let q = n / d;
    let r = n % d;
    let mag = if r >= (d - &r) { q + 1u32 } else { q };
    let mag = BigInt::from_biguint(Sign::Plus, mag);
    if negative {
        -mag
    } else {
        mag
    }
}

/// Evaluates `Π numer / Π denom` over satoshi-sized factors and rounds once,
/// half away from zero. Uses 128-bit arithmetic when the products fit and
/// falls back to big integers otherwise.
///
/// Returns `None` when the denominator product is zero or the rounded result
/// does not fit into `u64`.
pub fn mul_div_round(numer: &[u64], denom: &[u64]) -> Option<u64> {
    let small = |fs: &[u64]| -> Option<u128> {
        fs.iter()
            .try_fold(1u128, |acc, &f| acc.checked_mul(f as u128))
    };
    if let (Some(n), Some(d)) = (small(numer), small(denom)) {
        if d == 0 {
            return None;
        }
        if n <= i128::MAX as u128 && d <= i128::MAX as u128 {
            let r = round_half_away_from_zero(n as i128, d as i128);
            return u64::try_from(r).ok();
        }
    }
    let big = |fs: &[u64]| fs.iter().fold(BigInt::from(1u8), |acc, &f| acc * f);
    let d = big(denom);
    if d.sign() == Sign::NoSign {
        return None;
    }
    let r = round_half_away_from_zero_big(&big(numer), &d);
    u64::try_from(r).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_node_decimals() {
        assert_eq!(Amount::from_btc_str("34.93").unwrap().to_sat(), 3_493_000_000);
        assert_eq!(Amount::from_btc_str("52.01").unwrap().to_sat(), 5_201_000_000);
        assert_eq!(Amount::from_btc_str("0.00000001").unwrap().to_sat(), 1);
        assert_eq!(Amount::from_btc_str("1.00000000").unwrap().to_sat(), COIN);
        assert_eq!(Amount::from_btc_str("0").unwrap(), Amount::ZERO);
        assert_eq!(Amount::from_btc_str("21000000").unwrap().to_sat(), 21_000_000 * COIN);
    }

    #[test]
    fn rejects_bad_decimals() {
        assert!(matches!(
            Amount::from_btc_str("0.000000001"),
            Err(AmountError::Precision(_))
        ));
        assert!(matches!(Amount::from_btc_str("-1"), Err(AmountError::Negative(_))));
        assert!(matches!(Amount::from_btc_str("1e-8"), Err(AmountError::InvalidChar('e', _))));
        assert!(matches!(Amount::from_btc_str(".5"), Err(AmountError::InvalidChar('.', _))));
        assert!(matches!(Amount::from_btc_str("5."), Err(AmountError::InvalidChar('.', _))));
        assert!(matches!(Amount::from_btc_str(""), Err(AmountError::Empty)));
        assert!(matches!(
            Amount::from_btc_str("184467440737.09551616"),
            Err(AmountError::Overflow(_))
        ));
    }

    #[test]
    fn canonical_format() {
        assert_eq!(Amount::from_sat(3_493_000_000).to_btc_string(), "34.93000000");
        assert_eq!(Amount::from_sat(1).to_btc_string(), "0.00000001");
    }

    #[test]
    fn rounding_ties() {
        assert_eq!(round_half_away_from_zero(5, 2), 3);
        assert_eq!(round_half_away_from_zero(-5, 2), -3);
        assert_eq!(round_half_away_from_zero(5, -2), -3);
        assert_eq!(round_half_away_from_zero(7, 3), 2);
        assert_eq!(round_half_away_from_zero(-7, 3), -2);
        assert_eq!(round_half_away_from_zero(0, 9), 0);
        // 10^6 * 10^8 / (3.292 * 10^9)
        assert_eq!(round_half_away_from_zero(100_000_000_000_000, 3_292_000_000), 30377);
    }

    #[test]
    fn big_fallback_agrees() {
        let huge = [2_100_000_000_000_000u64, 2_100_000_000_000_000, 3];
        let den = [2_100_000_000_000_000u64, 2_100_000_000_000_000, 2];
        // 3/2 rounds to 2
        assert_eq!(mul_div_round(&huge, &den), Some(2));
        assert_eq!(mul_div_round(&[1, 2], &[0]), None);
        assert_eq!(mul_div_round(&[7], &[2]), Some(4));
    }

    proptest::proptest! {
        #[test]
        fn format_parse_is_identity(sat in 0u64..=21_000_000 * COIN) {
            let a = Amount::from_sat(sat);
            proptest::prop_assert_eq!(Amount::from_btc_str(&a.to_btc_string()).unwrap(), a);
        }

        #[test]
        fn parse_format_canonicalizes(int in 0u64..21_000_000, frac in 0u64..COIN, digits in 1usize..=8) {
            // Render `frac` with `digits` digits (dropping low digits), then parse.
            let scale = 10u64.pow((8 - digits) as u32);
            let kept = frac / scale;
            let s = format!("{int}.{kept:0width$}", width = digits);
            let parsed = Amount::from_btc_str(&s).unwrap();
            proptest::prop_assert_eq!(parsed.to_btc_string(), format!("{int}.{:08}", kept * scale));
        }

        #[test]
        fn big_and_small_rounding_agree(n in -1_000_000_000_000i128..1_000_000_000_000, d in 1i128..1_000_000) {
            let small = round_half_away_from_zero(n, d);
            let big = round_half_away_from_zero_big(&BigInt::from(n), &BigInt::from(d));
            proptest::prop_assert_eq!(BigInt::from(small), big);
        }
    }
}
