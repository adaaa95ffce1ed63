//! Exact values in the additive value group `Q ∪ {+∞}`.
//!
//! Valuations are normalized so that `v(p) = 1`; radii of discs and annuli are
//! stored as valuation exponents, so every radius computation stays exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{0}` as a rational value")]
pub struct ParseValError(pub String);

/// An exact rational number or `+∞`.
///
/// `Finite` values always sit below `Infinity`, so the derived order is the
/// usual order on the extended value group.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RationalVal {
    Finite(BigRational),
    Infinity,
}

impl RationalVal {
    pub fn zero() -> Self {
        RationalVal::Finite(BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        RationalVal::Finite(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num / den` in lowest terms. Panics on `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        RationalVal::Finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, RationalVal::Infinity)
    }

    pub fn is_finite(&self) -> bool {
        !self.is_infinite()
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            RationalVal::Finite(q) => Some(q),
            RationalVal::Infinity => None,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.finite().is_some_and(|q| q.is_integer())
    }

    /// The value as an `i64` when it is a finite integer that fits.
    pub fn to_i64(&self) -> Option<i64> {
        self.finite()
            .filter(|q| q.is_integer())
            .and_then(|q| q.to_integer().to_i64())
    }

    pub fn floor(&self) -> Option<BigInt> {
        self.finite().map(|q| q.floor().to_integer())
    }

    pub fn ceil(&self) -> Option<BigInt> {
        self.finite().map(|q| q.ceil().to_integer())
    }

    pub fn is_positive(&self) -> bool {
        match self {
            RationalVal::Finite(q) => q.is_positive(),
            RationalVal::Infinity => true,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.finite().is_some_and(|q| q.is_negative())
    }

    pub fn mul_int(&self, k: i64) -> Self {
        match self {
            RationalVal::Finite(q) => RationalVal::Finite(q * BigInt::from(k)),
            RationalVal::Infinity => match k.cmp(&0) {
                Ordering::Greater => RationalVal::Infinity,
                Ordering::Equal => RationalVal::zero(),
                Ordering::Less => panic!("negative multiple of +inf"),
            },
        }
    }

    /// Reduce a finite value into `[0, modulus)`; returns the quotient too,
    /// so that `self = quotient * modulus + remainder`.
    pub fn div_rem_floor(&self, modulus: &BigRational) -> Option<(BigInt, RationalVal)> {
        assert!(modulus.is_positive(), "modulus must be positive");
        let q = self.finite()?;
        let quotient = (q / modulus).floor().to_integer();
        let rem = q - modulus * BigRational::from_integer(quotient.clone());
        Some((quotient, RationalVal::Finite(rem)))
    }
}

impl From<BigRational> for RationalVal {
    fn from(q: BigRational) -> Self {
        RationalVal::Finite(q)
    }
}

impl From<i64> for RationalVal {
    fn from(n: i64) -> Self {
        RationalVal::from_int(n)
    }
}

impl Add for &RationalVal {
    type Output = RationalVal;
    fn add(self, rhs: &RationalVal) -> RationalVal {
        match (self, rhs) {
            (RationalVal::Finite(a), RationalVal::Finite(b)) => RationalVal::Finite(a + b),
            _ => RationalVal::Infinity,
        }
    }
}

impl Add for RationalVal {
    type Output = RationalVal;
    fn add(self, rhs: RationalVal) -> RationalVal {
        &self + &rhs
    }
}

/// Subtraction of a finite value. Panics when `rhs` is infinite.
impl Sub for &RationalVal {
    type Output = RationalVal;
    fn sub(self, rhs: &RationalVal) -> RationalVal {
        match (self, rhs) {
            (_, RationalVal::Infinity) => panic!("subtracting +inf"),
            (RationalVal::Infinity, _) => RationalVal::Infinity,
            (RationalVal::Finite(a), RationalVal::Finite(b)) => RationalVal::Finite(a - b),
        }
    }
}

impl Sub for RationalVal {
    type Output = RationalVal;
    fn sub(self, rhs: RationalVal) -> RationalVal {
        &self - &rhs
    }
}

impl Neg for &RationalVal {
    type Output = RationalVal;
    fn neg(self) -> RationalVal {
        match self {
            RationalVal::Finite(a) => RationalVal::Finite(-a),
            RationalVal::Infinity => panic!("negating +inf"),
        }
    }
}

impl Mul<&BigRational> for &RationalVal {
    type Output = RationalVal;
    fn mul(self, rhs: &BigRational) -> RationalVal {
        match self {
            RationalVal::Finite(a) => RationalVal::Finite(a * rhs),
            RationalVal::Infinity if rhs.is_positive() => RationalVal::Infinity,
            RationalVal::Infinity if rhs.is_zero() => RationalVal::zero(),
            RationalVal::Infinity => panic!("negative multiple of +inf"),
        }
    }
}

impl fmt::Display for RationalVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalVal::Infinity => f.write_str("+inf"),
            RationalVal::Finite(q) if q.is_integer() => write!(f, "{}", q.numer()),
            RationalVal::Finite(q) => write!(f, "{}/{}", q.numer(), q.denom()),
        }
    }
}

/// Parse an integer, a fraction `a/b`, a terminating decimal `1.5`, or one of
/// `inf`, `+inf`, `∞`.
pub fn parse_rational(s: &str) -> Result<BigRational, ParseValError> {
    let err = || ParseValError(s.to_string());
    let t = s.trim();
    if let Some((num, den)) = t.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| err())?;
        let den: BigInt = den.trim().parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_digits = int_part.trim().trim_start_matches(['-', '+']);
        let whole: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().map_err(|_| err())?
        };
        let frac: BigInt = frac_part.parse().map_err(|_| err())?;
        let scale = num_traits::pow(BigInt::from(10), frac_part.len());
        let mut q = BigRational::new(whole * &scale + frac, scale);
        if negative {
            q = -q;
        }
        return Ok(q);
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(BigRational::from_integer(n))
}

impl FromStr for RationalVal {
    type Err = ParseValError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" | "∞" | "+∞" => Ok(RationalVal::Infinity),
            t => parse_rational(t).map(RationalVal::Finite),
        }
    }
}

// Integers serialize as JSON numbers; fractions and +inf as strings.
impl Serialize for RationalVal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.to_i64() {
            Some(n) => serializer.serialize_i64(n),
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for RationalVal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValVisitor;
        impl<'de> Visitor<'de> for ValVisitor {
            type Value = RationalVal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a string like \"1/2\" or \"+inf\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<RationalVal, E> {
                Ok(RationalVal::from_int(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<RationalVal, E> {
                Ok(RationalVal::Finite(BigRational::from_integer(BigInt::from(v))))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<RationalVal, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(ValVisitor)
    }
}

/// Least common multiple of the denominators, used to put a set of rational
/// exponents on a common integer lattice.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}
