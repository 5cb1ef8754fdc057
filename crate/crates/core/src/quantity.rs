//! Exact token quantities.
//!
//! All balances, supplies, shares and voting powers are carried as arbitrary
//! precision rationals so that conservation and split-invariance checks can be
//! exact. Values serialize as decimal strings when the denominator permits a
//! terminating expansion and as `p/q` otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Quantity(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid quantity literal `{0}`")]
pub struct ParseQuantityError(pub String);

impl Quantity {
    pub fn zero() -> Self {
        Quantity(BigRational::zero())
    }

    pub fn one() -> Self {
        Quantity(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Quantity(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Quantity(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Quantity(r)
    }

    /// Exact conversion of a finite float (every finite f64 is a dyadic rational).
    pub fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v).map(Quantity)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    /// Nearest f64 (correctly rounded).
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Self {
        Quantity(self.0.abs())
    }

    pub fn floor(&self) -> Self {
        Quantity(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Quantity(self.0.ceil())
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    /// Fixed-point decimal rendering with `places` fractional digits, rounded half away from zero.
    pub fn to_decimal_string(&self, places: usize) -> String {
        let scale = BigInt::from(10u32).pow(places as u32);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let neg = rounded.sign() == Sign::Minus;
        let digits = rounded.abs().to_string();
        let body = if places == 0 {
            digits
        } else {
            let padded = format!("{:0>width$}", digits, width = places + 1);
            let (int, frac) = padded.split_at(padded.len() - places);
            format!("{int}.{frac}")
        };
        if neg {
            format!("-{body}")
        } else {
            body
        }
    }

    /// Exact decimal expansion if the denominator has only 2 and 5 as prime factors.
    fn exact_decimal(&self) -> Option<String> {
        let den = self.0.denom().clone();
        let mut rest = den.clone();
        let two = BigInt::from(2u32);
        let five = BigInt::from(5u32);
        let (mut twos, mut fives) = (0usize, 0usize);
        while rest.is_even() {
            rest /= &two;
            twos += 1;
        }
        while (&rest % &five).is_zero() {
            rest /= &five;
            fives += 1;
        }
        if !rest.is_one() {
            return None;
        }
        let places = twos.max(fives);
        let s = self.to_decimal_string(places);
        if places == 0 {
            return Some(s);
        }
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        Some(trimmed.to_string())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact_decimal() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.0.numer(), self.0.denom()),
        }
    }
}

impl FromStr for Quantity {
    type Err = ParseQuantityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseQuantityError(s.to_string());
        let t = s.trim().replace('_', "");
        if t.is_empty() {
            return Err(err());
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Quantity(BigRational::new(n, d)));
        }
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => {
                let e: i32 = t[i + 1..].parse().map_err(|_| err())?;
                (&t[..i], e)
            }
            None => (t.as_str(), 0),
        };
        let (neg, mantissa) = match mantissa.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| err())?;
        let shift = exp - frac.len() as i32;
        let ten = BigInt::from(10u32);
        let mut r = BigRational::from_integer(digits);
        if shift >= 0 {
            r *= BigRational::from_integer(ten.pow(shift as u32));
        } else {
            r /= BigRational::from_integer(ten.pow((-shift) as u32));
        }
        Ok(Quantity(if neg { -r } else { r }))
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct QuantityVisitor;

impl Visitor<'_> for QuantityVisitor {
    type Value = Quantity;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a decimal string, fraction string or number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Quantity, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Quantity, E> {
        Ok(Quantity::from_int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Quantity, E> {
        Ok(Quantity(BigRational::from_integer(BigInt::from(v))))
    }

    // Floats go through their shortest round-trip literal so that `0.1`
    // in a document means one tenth, not the nearest binary fraction.
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Quantity, E> {
        if !v.is_finite() {
            return Err(E::custom("quantity must be finite"));
        }
        format!("{v}").parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(QuantityVisitor)
    }
}

impl schemars::JsonSchema for Quantity {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Quantity".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({
            "description": "Exact rational: decimal string, `p/q` string or number",
            "anyOf": [
                { "type": "string" },
                { "type": "number" }
            ]
        })
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Quantity {
            type Output = Quantity;
            fn $m(self, rhs: Quantity) -> Quantity {
                Quantity(self.0 $op rhs.0)
            }
        }
        impl<'a> $tr<&'a Quantity> for Quantity {
            type Output = Quantity;
            fn $m(self, rhs: &'a Quantity) -> Quantity {
                Quantity(self.0 $op &rhs.0)
            }
        }
        impl<'a> $tr<&'a Quantity> for &'a Quantity {
            type Output = Quantity;
            fn $m(self, rhs: &'a Quantity) -> Quantity {
                Quantity(&self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl AddAssign<&Quantity> for Quantity {
    fn add_assign(&mut self, rhs: &Quantity) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Quantity {
    fn add_assign(&mut self, rhs: Quantity) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Quantity> for Quantity {
    fn sub_assign(&mut self, rhs: &Quantity) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign for Quantity {
    fn sub_assign(&mut self, rhs: Quantity) {
        self.0 -= rhs.0;
    }
}

impl Neg for Quantity {
    type Output = Quantity;
    fn neg(self) -> Quantity {
        Quantity(-self.0)
    }
}

/// Running sum kept over an unreduced common denominator; reducing once at
/// the end is far cheaper than a gcd per addition.
#[derive(Default)]
struct Accumulator {
    num: BigInt,
    den: Option<BigInt>,
}

impl Accumulator {
    fn add(&mut self, r: &BigRational) {
        let (n, d) = (r.numer(), r.denom());
        match &mut self.den {
            None => {
                self.num = n.clone();
                self.den = Some(d.clone());
            }
            Some(den) if &*den == d => self.num += n,
            Some(den) => {
                let (q, rem) = den.div_rem(d);
                if rem.is_zero() {
                    self.num += n * q;
                    return;
                }
                let (q, rem) = d.div_rem(den);
                if rem.is_zero() {
                    self.num = &self.num * &q + n;
                    *den = d.clone();
                } else {
                    self.num = &self.num * d + n * &*den;
                    *den *= d;
                }
            }
        }
    }

    fn finish(self) -> Quantity {
        match self.den {
            None => Quantity::zero(),
            Some(den) => Quantity(BigRational::new(self.num, den)),
        }
    }
}

impl Sum for Quantity {
    fn sum<I: Iterator<Item = Quantity>>(iter: I) -> Quantity {
        let mut acc = Accumulator::default();
        iter.for_each(|q| acc.add(&q.0));
        acc.finish()
    }
}

impl<'a> Sum<&'a Quantity> for Quantity {
    fn sum<I: Iterator<Item = &'a Quantity>>(iter: I) -> Quantity {
        let mut acc = Accumulator::default();
        iter.for_each(|q| acc.add(&q.0));
        acc.finish()
    }
}

impl From<i64> for Quantity {
    fn from(v: i64) -> Self {
        Quantity::from_int(v)
    }
}

impl From<u64> for Quantity {
    fn from(v: u64) -> Self {
        Quantity(BigRational::from_integer(BigInt::from(v)))
    }
}

impl From<BigRational> for Quantity {
    fn from(r: BigRational) -> Self {
        Quantity(r)
    }
}

impl PartialEq<i64> for Quantity {
    fn eq(&self, other: &i64) -> bool {
        self.0 == BigRational::from_integer(BigInt::from(*other))
    }
}

impl PartialOrd<i64> for Quantity {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.0
            .partial_cmp(&BigRational::from_integer(BigInt::from(*other)))
    }
}

/// Shorthand for literals in tests and fixtures. Panics on malformed input.
pub fn q(s: &str) -> Quantity {
    s.parse().expect("valid quantity literal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(q("0.6") + q("0.4"), Quantity::one());
        assert_eq!(q("1/3") * Quantity::from_int(3), Quantity::one());
        assert_eq!(q("3.03e9"), Quantity::from_int(3_030_000_000));
        assert_eq!(q("-2.50"), Quantity::from_ratio(-5, 2));
        assert_eq!(q("1_000"), Quantity::from_int(1000));
        assert!("".parse::<Quantity>().is_err());
        assert!("1/0".parse::<Quantity>().is_err());
        assert!("abc".parse::<Quantity>().is_err());
        assert!(".".parse::<Quantity>().is_err());
    }

    #[test]
    fn display_prefers_exact_decimal() {
        assert_eq!(q("0.125").to_string(), "0.125");
        assert_eq!(q("100").to_string(), "100");
        assert_eq!(q("1/3").to_string(), "1/3");
        assert_eq!(q("-0.5").to_string(), "-0.5");
        assert_eq!(q("2/3").to_decimal_string(4), "0.6667");
        assert_eq!(q("-2/3").to_decimal_string(2), "-0.67");
        assert_eq!(q("0.004").to_decimal_string(2), "0.00");
    }

    #[test]
    fn float_input_uses_shortest_literal() {
        let v: Quantity = serde_json::from_str("0.1").unwrap();
        assert_eq!(v, Quantity::from_ratio(1, 10));
        let v: Quantity = serde_json::from_str("\"7/2\"").unwrap();
        assert_eq!(v, Quantity::from_ratio(7, 2));
    }

    proptest! {
        #[test]
        fn display_parse_roundtrip(n in -1_000_000i64..1_000_000, d in 1i64..5_000) {
            let v = Quantity::from_ratio(n, d);
            let back: Quantity = v.to_string().parse().unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
