//! Exact rationals, circle phases in R/Z, and text formats for both.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Parses `"num/den"`, an integer, or a plain decimal such as `"0.125"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a fraction or decimal: `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = |k: u32| 10i64.checked_pow(k).ok_or_else(bad);
    let mut r = if scale >= 0 {
        Rational::from_integer(num.checked_mul(ten(scale as u32)?).ok_or_else(bad)?)
    } else {
        Rational::new(num, ten((-scale) as u32)?)
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn format_big(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_big(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a fraction: `{s}`"));
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: BigInt = d.trim().parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

pub fn to_big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact rational value of a finite float.
pub fn f64_to_big(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

/// serde adapter writing a [`Rational`] as `"num/den"`.
pub mod as_fraction {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// A point of R/Z held as an exact fraction in `[0, 1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase(Rational);

impl Phase {
    pub fn new(r: Rational) -> Self {
        let f = r - r.floor();
        Phase(f)
    }

    /// The phase `a/p`.
    pub fn from_ratio(a: i64, p: i64) -> Self {
        Phase::new(Rational::new(a, p))
    }

    pub fn zero() -> Self {
        Phase(Rational::zero())
    }

    pub fn value(&self) -> Rational {
        self.0
    }

    /// Distance to the nearest integer.
    pub fn norm(&self) -> Rational {
        let one = Rational::one();
        if self.0 * 2 > one {
            one - self.0
        } else {
            self.0
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }
}

impl fmt::Debug for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Add for Phase {
    type Output = Phase;
    fn add(self, o: Phase) -> Phase {
        Phase::new(self.0 + o.0)
    }
}

impl Sub for Phase {
    type Output = Phase;
    fn sub(self, o: Phase) -> Phase {
        Phase::new(self.0 - o.0)
    }
}

impl Neg for Phase {
    type Output = Phase;
    fn neg(self) -> Phase {
        Phase::new(-self.0)
    }
}

impl Mul<i64> for Phase {
    type Output = Phase;
    fn mul(self, k: i64) -> Phase {
        let r = self.0;
        // Reduce the numerator first so large multipliers do not overflow.
        let n = (*r.numer() as i128 * k as i128).rem_euclid(*r.denom() as i128) as i64;
        Phase(Rational::new(n, *r.denom()))
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Phase, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s)
            .map(Phase::new)
            .map_err(serde::de::Error::custom)
    }
}

/// `|x|` for a big rational, kept here to avoid trait imports downstream.
pub fn big_abs(x: &BigRational) -> BigRational {
    x.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/5").unwrap(), Rational::new(1, 5));
        assert_eq!(parse_rational("0.2").unwrap(), Rational::new(1, 5));
        assert_eq!(parse_rational("-0.125").unwrap(), Rational::new(-1, 8));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3));
        assert_eq!(parse_rational("2.5e-1").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn phase_arithmetic() {
        let a = Phase::from_ratio(3, 7);
        let b = Phase::from_ratio(5, 7);
        assert_eq!(a + b, Phase::from_ratio(1, 7));
        assert_eq!(a - b, Phase::from_ratio(5, 7));
        assert_eq!((-a).value(), Rational::new(4, 7));
        assert_eq!(b.norm(), Rational::new(2, 7));
        assert_eq!(a * 3, Phase::from_ratio(2, 7));
        assert_eq!(a * -1, -a);
        assert_eq!(Phase::from_ratio(-14, 7), Phase::zero());
    }

    #[test]
    fn big_round_trip() {
        let r = parse_big("17/55").unwrap();
        assert_eq!(format_big(&r), "17/55");
        assert_eq!(f64_to_big(0.5), parse_big("1/2").unwrap());
    }
}
