//! Numeric abstractions shared across the crate.
//!
//! Network parameters are stored as exact rationals so the LP oracle can run
//! in exact arithmetic. The simplex itself is generic over [`LpScalar`], which
//! is implemented for `f32`, `f64` and [`BigRational`].

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer};

/// Exact rational used for scenario parameters (capacities, costs, scaling factors).
pub type Rational = Ratio<i64>;

/// Arbitrary-precision rational used by the exact LP backend.
pub type BigRational = Ratio<BigInt>;

/// Scalar field the simplex tableau operates over.
pub trait LpScalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// True when arithmetic is exact and no tolerance is needed.
    const EXACT: bool;

    /// Magnitude below which a value is treated as zero.
    fn tolerance() -> Self;

    fn from_rational(r: &Rational) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_pos(&self) -> bool {
        *self > Self::tolerance()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::tolerance()
    }

    fn is_negligible(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

impl LpScalar for f64 {
    const EXACT: bool = false;

    fn tolerance() -> Self {
        1e-9
    }

    fn from_rational(r: &Rational) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }
}

impl LpScalar for f32 {
    const EXACT: bool = false;

    fn tolerance() -> Self {
        1e-5
    }

    fn from_rational(r: &Rational) -> Self {
        (*r.numer() as f64 / *r.denom() as f64) as f32
    }
}

impl LpScalar for BigRational {
    const EXACT: bool = true;

    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn from_rational(r: &Rational) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses `"3"`, `"0.25"`, `"1e-3"` or `"1/3"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut numer: i128 = digits.trim_start_matches('0').parse().unwrap_or(0);
    let mut scale = exp - frac_part.len() as i32;
    let mut denom: i128 = 1;
    while scale > 0 {
        numer = numer.checked_mul(10)?;
        scale -= 1;
    }
    while scale < 0 {
        denom = denom.checked_mul(10)?;
        scale += 1;
    }
    let g = gcd_i128(numer, denom);
    let (numer, denom) = (numer / g, denom / g);
    let numer = i64::try_from(numer).ok()?;
    let denom = i64::try_from(denom).ok()?;
    Some(Rational::new(if negative { -numer } else { numer }, denom))
}

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs().max(1)
}

/// Converts a float through its shortest round-trip decimal form, so that
/// `0.9` becomes exactly `9/10`. Falls back to a continued-fraction
/// approximation when the decimal does not fit in 64-bit terms.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_decimal(&format!("{x}")).or_else(|| Rational::approximate_float(x))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRational {
    Int(i64),
    Float(f64),
    Text(String),
}

/// Serde adapter: accepts a JSON number or a string such as `"1/300"`.
pub fn deserialize_rational<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
    use serde::de::Error;
    match RawRational::deserialize(d)? {
        RawRational::Int(i) => Ok(Rational::from_integer(i)),
        RawRational::Float(f) => {
            rational_from_f64(f).ok_or_else(|| D::Error::custom(format!("invalid number {f}")))
        }
        RawRational::Text(s) => {
            parse_rational(&s).ok_or_else(|| D::Error::custom(format!("invalid rational {s:?}")))
        }
    }
}

pub fn deserialize_opt_rational<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<Option<Rational>, D::Error> {
    deserialize_rational(d).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.9"), Some(Rational::new(9, 10)));
        assert_eq!(parse_rational("1/300"), Some(Rational::new(1, 300)));
        assert_eq!(parse_rational("-2.5e-3"), Some(Rational::new(-1, 400)));
        assert_eq!(parse_rational("12"), Some(Rational::from_integer(12)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn float_round_trip_uses_shortest_decimal() {
        assert_eq!(rational_from_f64(0.1), Some(Rational::new(1, 10)));
        assert_eq!(rational_from_f64(1e-9), Some(Rational::new(1, 1_000_000_000)));
        assert_eq!(rational_from_f64(f64::NAN), None);
    }

    #[test]
    fn exact_scalar_has_zero_tolerance() {
        let third = BigRational::from_rational(&Rational::new(1, 3));
        assert!(third.is_pos());
        assert!(BigRational::zero().is_negligible());
        assert!(1e-12f64.is_negligible());
    }
}
