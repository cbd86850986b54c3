//! Exact rational helpers shared by every module.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn from_biguints(numer: &BigUint, denom: &BigUint) -> Rational {
    Rational::new(BigInt::from(numer.clone()), BigInt::from(denom.clone()))
}

/// Lossy conversion for reporting only.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Fall back to a scaled division when numerator or denominator overflow f64.
        let shift = value.denom().bits().max(value.numer().bits()).saturating_sub(1000);
        let n = (value.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (value.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// `p/q` form, always with an explicit denominator.
pub fn exact(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Serde helper writing a rational as its exact `p/q` string.
pub fn serialize<S: serde::Serializer>(value: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&exact(value))
}

/// Parses `p/q`, a decimal such as `0.25`, or an integer.
pub fn parse(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Argument(format!("not a rational number: {text:?}"));
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac: BigInt = frac.parse().map_err(|_| bad())?;
        let magnitude = whole.abs() * &scale + frac;
        let numer = if negative { -magnitude } else { magnitude };
        return Ok(Rational::new(numer, scale));
    }
    let n: BigInt = text.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn in_unit_interval(value: &Rational) -> bool {
    !value.is_negative() && value <= &Rational::one()
}

/// Least common multiple of the denominators, as an unsigned integer.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigUint {
    values.into_iter().fold(BigUint::one(), |acc, v| {
        let d = v.denom().magnitude();
        acc.lcm(d)
    })
}

/// Numerator of `value` over `denom`; `denom` must be a multiple of the reduced denominator.
pub fn scaled_numerator(value: &Rational, denom: &BigUint) -> BigUint {
    debug_assert!(!value.is_negative());
    let factor = denom / value.denom().magnitude();
    value.numer().magnitude() * factor
}
