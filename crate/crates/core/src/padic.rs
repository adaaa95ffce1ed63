//! Capped-relative-precision p-adic scalars.
//!
//! A nonzero scalar is `unit * p^val` with `unit` a p-adic unit known modulo
//! `p^prec`. The relative precision `prec` starts at the context precision `N`
//! and only ever shrinks: cancellation in a sum lowers it, and the loss is
//! visible through [`PadicScalar::rel_precision`]. A sum that cancels
//! completely yields an *inexact zero* `O(p^k)` that remembers its absolute
//! precision `k`; only scalars built from an exact `0` are exact zeros.
//!
//! Units are stored as `u64`, so a context requires `p^N < 2^62`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("precision must be at least 1")]
    ZeroPrecision,
    #[error("p^N = {p}^{n} does not fit the 62-bit unit representation")]
    PrecisionTooLarge { p: u64, n: u32 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("scalars from different contexts ({0} vs {1})")]
    ContextMismatch(PadicContext, PadicContext),
    #[error("cannot parse `{0}` as a p-adic scalar")]
    Parse(String),
    #[error("scalar has negative valuation, no residue")]
    NotIntegral,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// The prime and working precision shared by every scalar in a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawContext")]
pub struct PadicContext {
    p: u64,
    precision: u32,
}

#[derive(Deserialize)]
struct RawContext {
    p: u64,
    precision: u32,
}

impl TryFrom<RawContext> for PadicContext {
    type Error = PadicError;
    fn try_from(raw: RawContext) -> Result<Self, PadicError> {
        PadicContext::new(raw.p, raw.precision)
    }
}

impl fmt::Display for PadicContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q_{} at precision {}", self.p, self.precision)
    }
}

impl PadicContext {
    pub fn new(p: u64, precision: u32) -> Result<Self, PadicError> {
        if !is_prime(p) {
            return Err(PadicError::NotPrime(p));
        }
        if precision == 0 {
            return Err(PadicError::ZeroPrecision);
        }
        let fits = (p as u128)
            .checked_pow(precision)
            .is_some_and(|m| m < (1u128 << 62));
        if !fits {
            return Err(PadicError::PrecisionTooLarge { p, n: precision });
        }
        Ok(PadicContext { p, precision })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `p^k` for `k <= N`.
    #[inline]
    fn pow(&self, k: u32) -> u64 {
        debug_assert!(k <= self.precision);
        self.p.pow(k)
    }

    pub fn zero(&self) -> PadicScalar {
        PadicScalar { ctx: *self, repr: Repr::Zero { abs: None } }
    }

    /// The inexact zero `O(p^abs)`.
    pub fn zero_to(&self, abs: i64) -> PadicScalar {
        PadicScalar { ctx: *self, repr: Repr::Zero { abs: Some(abs) } }
    }

    pub fn one(&self) -> PadicScalar {
        self.from_int(1)
    }

    /// `p^k` at full relative precision.
    pub fn uniformizer_pow(&self, k: i64) -> PadicScalar {
        PadicScalar { ctx: *self, repr: Repr::Nonzero { val: k, unit: 1, prec: self.precision } }
    }

    /// `unit * p^val` where `unit` is any integer prime to `p`.
    pub fn from_parts(&self, val: i64, unit: i64) -> PadicScalar {
        assert!(unit % self.p as i64 != 0, "unit part divisible by p");
        let m = self.pow(self.precision) as i64;
        PadicScalar {
            ctx: *self,
            repr: Repr::Nonzero { val, unit: unit.rem_euclid(m) as u64, prec: self.precision },
        }
    }

    pub fn from_int(&self, n: i64) -> PadicScalar {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(&self, n: &BigInt) -> PadicScalar {
        if n.is_zero() {
            return self.zero();
        }
        let p = BigInt::from(self.p);
        let mut val = 0i64;
        let mut rest = n.clone();
        loop {
            let (q, r) = rest.div_rem(&p);
            if !r.is_zero() {
                break;
            }
            rest = q;
            val += 1;
        }
        let m = BigInt::from(self.pow(self.precision));
        let unit = rest.mod_floor(&m).to_u64().expect("reduced below modulus");
        PadicScalar { ctx: *self, repr: Repr::Nonzero { val, unit, prec: self.precision } }
    }

    pub fn from_rational(&self, q: &BigRational) -> PadicScalar {
        let num = self.from_bigint(q.numer());
        if num.is_zero() {
            return num;
        }
        let den = self.from_bigint(q.denom());
        num.div(&den).expect("denominator is nonzero")
    }

    /// Parse an integer or a fraction `a/b`.
    pub fn parse(&self, s: &str) -> Result<PadicScalar, PadicError> {
        let q = crate::val::parse_rational(s).map_err(|_| PadicError::Parse(s.to_string()))?;
        Ok(self.from_rational(&q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Repr {
    /// `abs = None` is the exact zero; `Some(k)` is `O(p^k)`.
    Zero { abs: Option<i64> },
    Nonzero { val: i64, unit: u64, prec: u32 },
}

/// An element of `Q_p` at capped relative precision.
///
/// Equality is structural: two scalars are equal when they carry the same
/// digits *and* the same precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawScalar", into = "RawScalar")]
pub struct PadicScalar {
    ctx: PadicContext,
    repr: Repr,
}

#[derive(Serialize, Deserialize)]
struct RawScalar {
    p: u64,
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    v: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    u: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    prec: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    zero_abs: Option<i64>,
}

impl From<PadicScalar> for RawScalar {
    fn from(s: PadicScalar) -> Self {
        let (v, u, prec, zero_abs) = match s.repr {
            Repr::Zero { abs } => (None, None, None, abs),
            Repr::Nonzero { val, unit, prec } => (Some(val), Some(unit), Some(prec), None),
        };
        RawScalar { p: s.ctx.p, n: s.ctx.precision, v, u, prec, zero_abs }
    }
}

impl TryFrom<RawScalar> for PadicScalar {
    type Error = PadicError;
    fn try_from(raw: RawScalar) -> Result<Self, PadicError> {
        let ctx = PadicContext::new(raw.p, raw.n)?;
        let bad = || PadicError::Parse("malformed scalar record".into());
        let repr = match (raw.v, raw.u, raw.prec) {
            (None, None, None) => Repr::Zero { abs: raw.zero_abs },
            (Some(val), Some(unit), Some(prec)) => {
                if prec == 0 || prec > ctx.precision || unit % ctx.p == 0 || unit >= ctx.pow(prec) {
                    return Err(bad());
                }
                Repr::Nonzero { val, unit, prec }
            }
            _ => return Err(bad()),
        };
        Ok(PadicScalar { ctx, repr })
    }
}

#[inline]
fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Inverse of `a` modulo `m`, for `gcd(a, m) = 1`.
fn invmod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1, "not invertible");
    t0.rem_euclid(m as i128) as u64
}

impl PadicScalar {
    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { abs: None })
    }

    /// Integer valuation, `None` for (exact or inexact) zero.
    pub fn valuation(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Nonzero { val, .. } => Some(val),
        }
    }

    /// The valuation as a value-group element; `+∞` iff the scalar is zero.
    pub fn val(&self) -> RationalVal {
        match self.repr {
            Repr::Zero { .. } => RationalVal::Infinity,
            Repr::Nonzero { val, .. } => RationalVal::from_int(val),
        }
    }

    /// The largest valuation the true value is guaranteed to have: the
    /// valuation for nonzero scalars, `k` for `O(p^k)`, `+∞` for exact zero.
    pub fn certified_valuation(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Nonzero { val, .. } => Some(val),
        }
    }

    pub fn certified_val(&self) -> RationalVal {
        self.certified_valuation()
            .map_or(RationalVal::Infinity, RationalVal::from_int)
    }

    /// The unit part, `0` for zero.
    pub fn unit(&self) -> u64 {
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Nonzero { unit, .. } => unit,
        }
    }

    /// Remaining relative precision in digits; `0` for zero.
    pub fn rel_precision(&self) -> u32 {
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Nonzero { prec, .. } => prec,
        }
    }

    /// Absolute precision `val + prec`; `None` for the exact zero.
    pub fn abs_precision(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Nonzero { val, prec, .. } => Some(val + prec as i64),
        }
    }

    fn check(&self, other: &PadicScalar) -> Result<(), PadicError> {
        if self.ctx == other.ctx {
            Ok(())
        } else {
            Err(PadicError::ContextMismatch(self.ctx, other.ctx))
        }
    }

    /// Reduce precision to absolute precision `abs` (never raises it).
    fn cap_abs(&self, abs: i64) -> PadicScalar {
        match self.repr {
            Repr::Zero { abs: None } => self.ctx.zero_to(abs),
            Repr::Zero { abs: Some(k) } => self.ctx.zero_to(k.min(abs)),
            Repr::Nonzero { val, unit, prec } => {
                if abs <= val {
                    self.ctx.zero_to(abs)
                } else if abs - val >= prec as i64 {
                    *self
                } else {
                    let prec = (abs - val) as u32;
                    let unit = unit % self.ctx.pow(prec);
                    PadicScalar { ctx: self.ctx, repr: Repr::Nonzero { val, unit, prec } }
                }
            }
        }
    }

    pub fn checked_add(&self, other: &PadicScalar) -> Result<PadicScalar, PadicError> {
        self.check(other)?;
        Ok(self.add_unchecked(other))
    }

    fn add_unchecked(&self, other: &PadicScalar) -> PadicScalar {
        let (va, ua, pa, vb, ub, pb) = match (self.repr, other.repr) {
            (Repr::Zero { abs: None }, _) => return *other,
            (_, Repr::Zero { abs: None }) => return *self,
            (Repr::Zero { abs: Some(k) }, _) => return other.cap_abs(k),
            (_, Repr::Zero { abs: Some(k) }) => return self.cap_abs(k),
            (
                Repr::Nonzero { val: va, unit: ua, prec: pa },
                Repr::Nonzero { val: vb, unit: ub, prec: pb },
            ) => (va, ua, pa, vb, ub, pb),
        };
        let abs = (va + pa as i64).min(vb + pb as i64);
        let v = va.min(vb);
        // abs > v always, and abs - v <= N.
        let width = (abs - v) as u32;
        let m = self.ctx.pow(width);
        let shifted = |val: i64, unit: u64| -> u64 {
            let shift = val - v;
            if shift >= width as i64 {
                0
            } else {
                mulmod(unit % m, self.ctx.pow(shift as u32), m)
            }
        };
        let sum = (shifted(va, ua) + shifted(vb, ub)) % m;
        if sum == 0 {
            return self.ctx.zero_to(abs);
        }
        let mut unit = sum;
        let mut val = v;
        while unit.is_multiple_of(self.ctx.p) {
            unit /= self.ctx.p;
            val += 1;
        }
        let prec = (abs - val) as u32;
        PadicScalar { ctx: self.ctx, repr: Repr::Nonzero { val, unit: unit % self.ctx.pow(prec), prec } }
    }

    pub fn neg(&self) -> PadicScalar {
        match self.repr {
            Repr::Zero { .. } => *self,
            Repr::Nonzero { val, unit, prec } => {
                let m = self.ctx.pow(prec);
                PadicScalar { ctx: self.ctx, repr: Repr::Nonzero { val, unit: m - unit, prec } }
            }
        }
    }

    pub fn checked_sub(&self, other: &PadicScalar) -> Result<PadicScalar, PadicError> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &PadicScalar) -> Result<PadicScalar, PadicError> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &PadicScalar) -> PadicScalar {
        match (self.repr, other.repr) {
            (Repr::Zero { abs: None }, _) | (_, Repr::Zero { abs: None }) => self.ctx.zero(),
            (Repr::Zero { abs: Some(k) }, r) | (r, Repr::Zero { abs: Some(k) }) => match r {
                Repr::Zero { abs: Some(l) } => self.ctx.zero_to(k + l),
                Repr::Nonzero { val, .. } => self.ctx.zero_to(k + val),
                Repr::Zero { abs: None } => unreachable!(),
            },
            (
                Repr::Nonzero { val: va, unit: ua, prec: pa },
                Repr::Nonzero { val: vb, unit: ub, prec: pb },
            ) => {
                let prec = pa.min(pb);
                let m = self.ctx.pow(prec);
                PadicScalar {
                    ctx: self.ctx,
                    repr: Repr::Nonzero { val: va + vb, unit: mulmod(ua % m, ub % m, m), prec },
                }
            }
        }
    }

    pub fn inv(&self) -> Result<PadicScalar, PadicError> {
        match self.repr {
            Repr::Zero { .. } => Err(PadicError::DivisionByZero),
            Repr::Nonzero { val, unit, prec } => {
                let m = self.ctx.pow(prec);
                Ok(PadicScalar { ctx: self.ctx, repr: Repr::Nonzero { val: -val, unit: invmod(unit, m), prec } })
            }
        }
    }

    pub fn div(&self, other: &PadicScalar) -> Result<PadicScalar, PadicError> {
        self.checked_mul(&other.inv()?)
    }

    /// Integer power; negative exponents require a nonzero base.
    pub fn pow(&self, e: i64) -> Result<PadicScalar, PadicError> {
        let base = if e < 0 { self.inv()? } else { *self };
        let mut k = e.unsigned_abs();
        let mut acc = self.ctx.one();
        let mut sq = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_unchecked(&sq);
            }
            sq = sq.mul_unchecked(&sq);
            k >>= 1;
        }
        Ok(acc)
    }

    /// Multiply by `p^k`.
    pub fn shift(&self, k: i64) -> PadicScalar {
        match self.repr {
            Repr::Zero { abs: None } => *self,
            Repr::Zero { abs: Some(a) } => self.ctx.zero_to(a + k),
            Repr::Nonzero { val, unit, prec } => {
                PadicScalar { ctx: self.ctx, repr: Repr::Nonzero { val: val + k, unit, prec } }
            }
        }
    }

    /// Image in the residue field `F_p`; requires valuation `>= 0`.
    pub fn residue(&self) -> Result<u64, PadicError> {
        match self.repr {
            Repr::Zero { abs } if abs.is_none_or(|k| k >= 1) => Ok(0),
            Repr::Zero { .. } => Err(PadicError::NotIntegral),
            Repr::Nonzero { val, .. } if val > 0 => Ok(0),
            Repr::Nonzero { val: 0, unit, .. } => Ok(unit % self.ctx.p),
            Repr::Nonzero { .. } => Err(PadicError::NotIntegral),
        }
    }

    /// The rational number `u * p^v` with `u` taken in `[0, p^prec)`.
    pub fn to_rational(&self) -> BigRational {
        match self.repr {
            Repr::Zero { .. } => BigRational::zero(),
            Repr::Nonzero { val, unit, .. } => {
                let p = BigInt::from(self.ctx.p);
                let pv = num_traits::pow(p, val.unsigned_abs() as usize);
                let u = BigInt::from(unit);
                if val >= 0 {
                    BigRational::from_integer(u * pv)
                } else {
                    BigRational::new(u, pv)
                }
            }
        }
    }

    /// Whether `self - other` is zero to the precision both carry.
    pub fn agrees_with(&self, other: &PadicScalar) -> bool {
        self.sub(*other).is_zero()
    }

    /// Signed representative of the unit in `(-p^prec/2, p^prec/2]`, handy for
    /// human-facing output.
    pub fn balanced_unit(&self) -> i64 {
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Nonzero { unit, prec, .. } => {
                let m = self.ctx.pow(prec) as i64;
                let u = unit as i64;
                if u > m / 2 {
                    u - m
                } else {
                    u
                }
            }
        }
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.ctx.p;
        match self.repr {
            Repr::Zero { abs: None } => f.write_str("0"),
            Repr::Zero { abs: Some(k) } => write!(f, "O({p}^{k})"),
            Repr::Nonzero { val, unit, prec } => {
                write!(f, "{unit} * {p}^{val} + O({p}^{})", val + prec as i64)
            }
        }
    }
}

/// Operator forms panic on mixed contexts; use the `checked_*` methods when
/// operands may come from different computations.
impl Add for PadicScalar {
    type Output = PadicScalar;
    fn add(self, rhs: PadicScalar) -> PadicScalar {
        self.checked_add(&rhs).expect("p-adic context mismatch")
    }
}

impl Sub for PadicScalar {
    type Output = PadicScalar;
    fn sub(self, rhs: PadicScalar) -> PadicScalar {
        self.checked_sub(&rhs).expect("p-adic context mismatch")
    }
}

impl Mul for PadicScalar {
    type Output = PadicScalar;
    fn mul(self, rhs: PadicScalar) -> PadicScalar {
        self.checked_mul(&rhs).expect("p-adic context mismatch")
    }
}

impl Neg for PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        PadicScalar::neg(&self)
    }
}

/// Exact `p`-adic valuation of a nonzero rational.
pub fn rational_valuation(q: &BigRational, p: u64) -> Option<i64> {
    if q.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let count = |n: &BigInt| {
        let mut n = n.abs();
        let mut k = 0i64;
        while (&n % &p).is_zero() {
            n /= &p;
            k += 1;
        }
        k
    };
    Some(count(q.numer()) - count(q.denom()))
}

/// `a^e` over the rationals, used by tests and oracles that bypass the p-adic
/// representation.
pub fn rational_pow(a: &BigRational, e: i64) -> BigRational {
    let base = if e < 0 { a.recip() } else { a.clone() };
    num_traits::pow(base, e.unsigned_abs() as usize)
}
