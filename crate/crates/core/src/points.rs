//! Points of the adic closed disc and of `G_m`: types 1, 2 and 5.
//!
//! Type-5 points are modelled as a type-2 point plus a side: `Plus` is the
//! rank-2 point with `v(T - c) = r + ε` (pointing into the residue class of
//! `c`), `Minus` has `v(T - c) = r - ε` (pointing outward). Types 3 and 4 are
//! not representable.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{PadicContext, PadicError, PadicScalar};
use crate::series::{ChartKind, LaurentSeries, SeriesError};
use crate::val::{parse_rational, RationalVal};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PointError {
    #[error("point {0} lies outside the chart {1}")]
    OutsideChart(String, String),
    #[error("cannot recentre a series on the non-disc chart {0} at a nonzero center")]
    RecentreChart(String),
    #[error("join is only defined for type-1 and type-2 points")]
    JoinType5,
    #[error("the origin is not a point of G_m")]
    Origin,
    #[error("points {0} and {1} are indistinguishable at the working precision")]
    Indistinguishable(String, String),
    #[error("radius must be finite")]
    InfiniteRadius,
    #[error("cannot parse point `{0}`")]
    Parse(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `v(T - c) = r + ε`: the residue direction of `c` at level `r`.
    Plus,
    /// `v(T - c) = r - ε`: the outward direction.
    Minus,
}

impl Side {
    fn sign(self) -> i64 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiscPoint {
    Type1 { c: PadicScalar },
    Type2 { c: PadicScalar, r: RationalVal },
    Type5 { c: PadicScalar, r: RationalVal, side: Side },
}

/// Outcome of a semantic comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equal,
    Distinct,
    /// The data that would separate the points lies below working precision.
    Indistinguishable,
}

/// Values in `Q ⊕ Z ε`, compared lexicographically. JSON: `[main, eps]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(RationalVal, i64)", into = "(RationalVal, i64)")]
pub struct Rank2Val {
    pub main: RationalVal,
    pub eps: i64,
}

impl Rank2Val {
    pub fn rank1(main: RationalVal) -> Self {
        Rank2Val { main, eps: 0 }
    }

    pub fn infinity() -> Self {
        Rank2Val::rank1(RationalVal::Infinity)
    }
}

impl From<(RationalVal, i64)> for Rank2Val {
    fn from((main, eps): (RationalVal, i64)) -> Self {
        Rank2Val { main, eps }
    }
}

impl From<Rank2Val> for (RationalVal, i64) {
    fn from(v: Rank2Val) -> Self {
        (v.main, v.eps)
    }
}

impl fmt::Display for Rank2Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eps {
            0 => write!(f, "{}", self.main),
            e if e > 0 => write!(f, "{} + {}ε", self.main, e),
            e => write!(f, "{} - {}ε", self.main, -e),
        }
    }
}

/// `v(a - b)` compared against `r`: `Some(true)` if `>= r` (or `> r` when
/// `strict`), `Some(false)` if not, `None` if the difference is `O(p^k)` with
/// `k` too small to decide.
fn close_at(a: &PadicScalar, b: &PadicScalar, r: &RationalVal, strict: bool) -> Option<bool> {
    let d = *a - *b;
    let beyond = |v: &RationalVal| if strict { v > r } else { v >= r };
    match (d.valuation(), d.abs_precision()) {
        (Some(v), _) => Some(beyond(&RationalVal::from_int(v))),
        (None, None) => Some(true),
        (None, Some(k)) => {
            if beyond(&RationalVal::from_int(k)) {
                Some(true)
            } else {
                None
            }
        }
    }
}

fn verdict(x: Option<bool>) -> Equivalence {
    match x {
        Some(true) => Equivalence::Equal,
        Some(false) => Equivalence::Distinct,
        None => Equivalence::Indistinguishable,
    }
}

impl DiscPoint {
    pub fn type1(c: PadicScalar) -> Self {
        DiscPoint::Type1 { c }
    }

    pub fn type2(c: PadicScalar, r: RationalVal) -> Result<Self, PointError> {
        if r.is_infinite() {
            return Err(PointError::InfiniteRadius);
        }
        Ok(DiscPoint::Type2 { c, r })
    }

    pub fn type5(c: PadicScalar, r: RationalVal, side: Side) -> Result<Self, PointError> {
        if r.is_infinite() {
            return Err(PointError::InfiniteRadius);
        }
        Ok(DiscPoint::Type5 { c, r, side })
    }

    /// The Gauss point `η(0, 0)` of the unit disc.
    pub fn gauss(ctx: PadicContext) -> Self {
        DiscPoint::Type2 { c: ctx.zero(), r: RationalVal::zero() }
    }

    pub fn center(&self) -> &PadicScalar {
        match self {
            DiscPoint::Type1 { c } | DiscPoint::Type2 { c, .. } | DiscPoint::Type5 { c, .. } => c,
        }
    }

    /// Radius exponent; `+inf` for type 1.
    pub fn radius(&self) -> RationalVal {
        match self {
            DiscPoint::Type1 { .. } => RationalVal::Infinity,
            DiscPoint::Type2 { r, .. } | DiscPoint::Type5 { r, .. } => r.clone(),
        }
    }

    pub fn is_type5(&self) -> bool {
        matches!(self, DiscPoint::Type5 { .. })
    }

    /// Whether the point lies in the closed unit disc `v(T) >= 0`.
    pub fn in_unit_disc(&self) -> bool {
        let v = self.t_val();
        v >= Rank2Val::rank1(RationalVal::zero())
    }

    /// Rank-2 valuation of the coordinate `T` at this point.
    pub fn t_val(&self) -> Rank2Val {
        let vc = self.center().certified_val();
        match self {
            DiscPoint::Type1 { .. } => Rank2Val::rank1(vc),
            DiscPoint::Type2 { r, .. } => Rank2Val::rank1(vc.min(r.clone())),
            DiscPoint::Type5 { r, side, .. } => Rank2Val::rank1(vc).min(Rank2Val { main: r.clone(), eps: side.sign() }),
        }
    }

    /// Semantic equality up to working precision.
    pub fn equiv(&self, other: &DiscPoint) -> Equivalence {
        use DiscPoint::*;
        match (self, other) {
            (Type1 { c: a }, Type1 { c: b }) => {
                if (*a - *b).is_zero() {
                    Equivalence::Equal
                } else {
                    Equivalence::Distinct
                }
            }
            (Type2 { c: a, r: ra }, Type2 { c: b, r: rb }) if ra == rb => verdict(close_at(a, b, ra, false)),
            (Type5 { c: a, r: ra, side: sa }, Type5 { c: b, r: rb, side: sb }) if ra == rb && sa == sb => {
                // plus also needs the same residue class at level r
                verdict(close_at(a, b, ra, *sa == Side::Plus))
            }
            _ => Equivalence::Distinct,
        }
    }

    pub fn is_equiv(&self, other: &DiscPoint) -> bool {
        self.equiv(other) == Equivalence::Equal
    }

    /// Unique rank-1 generalization.
    pub fn max_generalization(&self) -> DiscPoint {
        match self {
            DiscPoint::Type5 { c, r, .. } => DiscPoint::Type2 { c: *c, r: r.clone() },
            x => x.clone(),
        }
    }

    fn text_center(&self) -> String {
        scalar_text(self.center())
    }
}

/// Human-readable rational representative with a balanced unit.
pub fn scalar_text(c: &PadicScalar) -> String {
    let Some(v) = c.valuation() else {
        return "0".to_string();
    };
    let u = BigInt::from(c.balanced_unit());
    let p = BigInt::from(c.context().prime());
    let pk = num_traits::pow(p, v.unsigned_abs() as usize);
    if v >= 0 {
        (u * pk).to_string()
    } else {
        BigRational::new(u, pk).to_string()
    }
}

impl fmt::Display for DiscPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscPoint::Type1 { .. } => write!(f, "x({})", self.text_center()),
            DiscPoint::Type2 { r, .. } => write!(f, "η({}, {})", self.text_center(), r),
            DiscPoint::Type5 { r, side, .. } => {
                let s = if *side == Side::Plus { '+' } else { '-' };
                write!(f, "η({}, {}){}", self.text_center(), r, s)
            }
        }
    }
}

/// Parse `x(c)`, `η(c, r)`, `η(c, r)+`, `η(c, r)-`; `eta` may replace `η`.
pub fn parse_point(ctx: &PadicContext, s: &str) -> Result<DiscPoint, PointError> {
    let err = || PointError::Parse(s.to_string());
    let t = s.trim();
    let (body, side) = match t.chars().last() {
        Some('+') => (&t[..t.len() - 1], Some(Side::Plus)),
        Some('-') => (&t[..t.len() - 1], Some(Side::Minus)),
        _ => (t, None),
    };
    let body = body.trim();
    let (head, rest) = body.split_once('(').ok_or_else(err)?;
    let inner = rest.strip_suffix(')').ok_or_else(err)?;
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    let scalar = |a: &str| ctx.parse(a).map_err(|_| err());
    let radius = |a: &str| parse_rational(a).map(RationalVal::Finite).map_err(|_| err());
    match (head.trim(), args.as_slice(), side) {
        ("x", [c], None) => Ok(DiscPoint::type1(scalar(c)?)),
        ("η" | "eta", [c, r], None) => DiscPoint::type2(scalar(c)?, radius(r)?),
        ("η" | "eta", [c, r], Some(side)) => DiscPoint::type5(scalar(c)?, radius(r)?, side),
        _ => Err(err()),
    }
}

impl FromStr for Side {
    type Err = PointError;
    fn from_str(s: &str) -> Result<Self, PointError> {
        match s {
            "plus" | "+" => Ok(Side::Plus),
            "minus" | "-" => Ok(Side::Minus),
            _ => Err(PointError::Parse(s.to_string())),
        }
    }
}

fn binomial_row(k: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for j in 0..k {
        let next = &row[j] * BigInt::from(k - j) / BigInt::from(j + 1);
        row.push(next);
    }
    row
}

/// Re-expand `f` in powers of `T - c`.
///
/// Needs a disc chart (nonnegative exponents) unless `c = 0`, in which case
/// `f` is returned unchanged. The chart is kept: for `v(c) >= a` the disc
/// `v(T) >= a` is also `v(T - c) >= a`.
pub fn recentre(f: &LaurentSeries, c: &PadicScalar) -> Result<LaurentSeries, PointError> {
    if c.is_exact_zero() {
        return Ok(f.clone());
    }
    if f.chart().kind() != ChartKind::Disc {
        return Err(PointError::RecentreChart(f.chart().to_string()));
    }
    if !f.chart().contains_val(&c.certified_val()) {
        return Err(PointError::OutsideChart(scalar_text(c), f.chart().to_string()));
    }
    let ctx = f.context();
    let d = f.window() as usize;
    let mut out = vec![ctx.zero(); d + 1];
    for (k, a) in f.terms() {
        let k = k as usize;
        let row = binomial_row(k);
        for (j, b) in row.iter().enumerate() {
            let term = *a * ctx.from_bigint(b) * c.pow((k - j) as i64)?;
            out[j] = out[j] + term;
        }
    }
    let terms = out.into_iter().enumerate().map(|(j, x)| (j as i64, x)).filter(|(_, x)| !x.is_exact_zero());
    Ok(LaurentSeries::from_terms(ctx, f.chart().clone(), f.window(), terms)?)
}

/// Whether a rank-2 value of `v(T)` lies in the chart.
fn chart_admits(f: &LaurentSeries, v: &Rank2Val) -> bool {
    let chart = f.chart();
    let above = match chart.outer() {
        None => true,
        Some(a) => Rank2Val::rank1(a) <= *v,
    };
    above && *v <= Rank2Val::rank1(chart.inner().clone())
}

/// Valuation `v(f(x))`, rank 2 at type-5 points.
pub fn seminorm_val(f: &LaurentSeries, x: &DiscPoint) -> Result<Rank2Val, PointError> {
    if !chart_admits(f, &x.t_val()) {
        return Err(PointError::OutsideChart(x.to_string(), f.chart().to_string()));
    }
    match x {
        DiscPoint::Type1 { c } => Ok(Rank2Val::rank1(f.evaluate(c)?.val())),
        DiscPoint::Type2 { c, r } => {
            let g = recentre(f, &effective_center(c, r, false))?;
            Ok(Rank2Val::rank1(g.gauss_with_radius(r)))
        }
        DiscPoint::Type5 { c, r, side } => {
            let g = recentre(f, &effective_center(c, r, *side == Side::Plus))?;
            let mut best = Rank2Val::infinity();
            for (i, a) in g.terms() {
                let va = a.val();
                if va.is_infinite() {
                    continue;
                }
                let cand = Rank2Val { main: &va + &r.mul_int(i), eps: side.sign() * i };
                best = best.min(cand);
            }
            Ok(best)
        }
    }
}

/// A center equivalent to `c` at level `r`; `0` when `c` is already close to
/// `0`, which avoids recentring (and chart restrictions) where possible.
fn effective_center(c: &PadicScalar, r: &RationalVal, strict: bool) -> PadicScalar {
    let zero = c.context().zero();
    match close_at(c, &zero, r, strict) {
        Some(true) => zero,
        _ => *c,
    }
}

trait GaussAt {
    fn gauss_with_radius(&self, r: &RationalVal) -> RationalVal;
}

impl GaussAt for LaurentSeries {
    /// `min_i (v(c_i) + i r)` without the chart check, since after recentring
    /// `r` is a radius of `T - c`, not a value of `v(T)`.
    fn gauss_with_radius(&self, r: &RationalVal) -> RationalVal {
        let mut best = RationalVal::Infinity;
        for (i, a) in self.terms() {
            let va = a.val();
            if va.is_finite() {
                best = best.min(&va + &r.mul_int(i));
            }
        }
        best
    }
}

/// `special` lies in the closure of `generic`: equal points, or a type-5 point
/// over an equivalent type-2 point.
pub fn specializes(generic: &DiscPoint, special: &DiscPoint) -> bool {
    if generic.is_equiv(special) {
        return true;
    }
    matches!(generic, DiscPoint::Type2 { .. }) && special.is_type5() && generic.is_equiv(&special.max_generalization())
}

fn diff_val(a: &PadicScalar, b: &PadicScalar) -> (RationalVal, bool) {
    let d = *a - *b;
    let exact = d.valuation().is_some() || d.is_exact_zero();
    (d.certified_val(), exact)
}

/// Smallest closed disc containing both points.
pub fn join(x: &DiscPoint, y: &DiscPoint) -> Result<DiscPoint, PointError> {
    if x.is_type5() || y.is_type5() {
        return Err(PointError::JoinType5);
    }
    if x.is_equiv(y) {
        return Ok(x.clone());
    }
    let (rx, ry) = (x.radius(), y.radius());
    let (dv, exact) = diff_val(x.center(), y.center());
    let r = rx.min(ry);
    if dv < r {
        if !exact {
            return Err(PointError::Indistinguishable(x.to_string(), y.to_string()));
        }
        return DiscPoint::type2(*x.center(), dv);
    }
    if r.is_infinite() {
        // two type-1 points that agree to full precision
        return Err(PointError::Indistinguishable(x.to_string(), y.to_string()));
    }
    DiscPoint::type2(*x.center(), r)
}

/// Breakpoints of the geodesic `x -> join(x, y) -> y`.
pub fn path_breakpoints(x: &DiscPoint, y: &DiscPoint) -> Result<Vec<DiscPoint>, PointError> {
    let j = join(x, y)?;
    let mut out: Vec<DiscPoint> = vec![x.clone()];
    for p in [j, y.clone()] {
        if !out.iter().any(|q| q.is_equiv(&p)) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Retraction of `G_m` onto its skeleton `{η(0, s)}`.
pub fn gm_retract(x: &DiscPoint) -> Result<RationalVal, PointError> {
    match x.max_generalization() {
        DiscPoint::Type1 { c } => {
            if c.is_zero() {
                return Err(PointError::Origin);
            }
            Ok(c.val())
        }
        DiscPoint::Type2 { c, r } => {
            let vc = c.certified_val();
            Ok(match vc.cmp(&r) {
                Ordering::Less => vc,
                _ => r,
            })
        }
        DiscPoint::Type5 { .. } => unreachable!("generalized above"),
    }
}

/// Rank-1 shadow of a rank-2 value.
pub fn forget_eps(v: &Rank2Val) -> RationalVal {
    v.main.clone()
}

/// Convenience for tests and the CLI: `Σ a_i T^i` from integer pairs on the
/// unit disc.
pub fn poly_on_unit_disc(ctx: PadicContext, window: u32, terms: &[(i64, i64)]) -> Result<LaurentSeries, PointError> {
    Ok(LaurentSeries::from_ints(ctx, crate::series::Chart::unit_disc(), window, terms)?)
}
