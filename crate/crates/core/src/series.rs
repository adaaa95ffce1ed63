//! Truncated Laurent series on disc, annulus and circle charts.
//!
//! A [`Chart`] is the set `{a <= v(T) <= b}` described by valuation bounds:
//! `b = +inf` is the closed disc `{|T| <= p^-a}` in `T`, `a = -inf` is the
//! closed disc in `T^-1`, and `a = b` is a circle. A [`LaurentSeries`] keeps the
//! coefficients of `T^i` for `i` in a symmetric window `[-D, D]`. Products that
//! push mass outside the window drop it and remember a lower bound for the
//! sup-valuation of what was dropped.

use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{PadicContext, PadicError, PadicScalar};
use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("valuation {0} lies outside the chart {1}")]
    OutOfChart(RationalVal, Chart),
    #[error("chart mismatch: {0} vs {1}")]
    ChartMismatch(Chart, Chart),
    #[error("window mismatch: {0} vs {1}")]
    WindowMismatch(u32, u32),
    #[error("chart {sub} is not contained in {chart}")]
    NotNested { sub: Chart, chart: Chart },
    #[error("expected a circle chart, got {0}")]
    NotCircle(Chart),
    #[error("invalid chart bounds [{0}, {1}]")]
    InvalidChart(String, RationalVal),
    #[error("substitution T -> 0*T")]
    ZeroScale,
    #[error("exponent {0} outside the window [-{1}, {1}]")]
    OutsideWindow(i64, u32),
    #[error("exponent {0} not allowed on chart {1}")]
    Support(i64, Chart),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// Valuation bounds `a <= v(T) <= b`; `a = None` stands for `-inf`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawChart", into = "RawChart")]
pub struct Chart {
    a: Option<BigRational>,
    b: RationalVal,
}

#[derive(Serialize, Deserialize)]
struct RawChart {
    /// `null` encodes `-inf`.
    a: Option<RationalVal>,
    b: RationalVal,
}

impl From<Chart> for RawChart {
    fn from(c: Chart) -> Self {
        RawChart { a: c.a.map(RationalVal::Finite), b: c.b }
    }
}

impl TryFrom<RawChart> for Chart {
    type Error = SeriesError;
    fn try_from(raw: RawChart) -> Result<Self, SeriesError> {
        match raw.a {
            None => Chart::inverse_disc(raw.b),
            Some(RationalVal::Finite(a)) => Chart::new(RationalVal::Finite(a), raw.b),
            Some(RationalVal::Infinity) => Err(SeriesError::InvalidChart("+inf".into(), raw.b)),
        }
    }
}

/// The shape of a chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChartKind {
    Disc,
    InverseDisc,
    Annulus,
    Circle,
}

impl Chart {
    /// `{a <= v(T) <= b}` with `a` finite and `a <= b`.
    pub fn new(a: RationalVal, b: RationalVal) -> Result<Chart, SeriesError> {
        match a {
            RationalVal::Finite(a) if RationalVal::Finite(a.clone()) <= b => Ok(Chart { a: Some(a), b }),
            a => Err(SeriesError::InvalidChart(a.to_string(), b)),
        }
    }

    pub fn disc(a: RationalVal) -> Result<Chart, SeriesError> {
        Chart::new(a, RationalVal::Infinity)
    }

    pub fn unit_disc() -> Chart {
        Chart::disc(RationalVal::zero()).expect("valid")
    }

    pub fn annulus(a: RationalVal, b: RationalVal) -> Result<Chart, SeriesError> {
        Chart::new(a, b)
    }

    pub fn circle(s: RationalVal) -> Result<Chart, SeriesError> {
        if s.is_infinite() {
            return Err(SeriesError::InvalidChart(s.to_string(), s));
        }
        Chart::new(s.clone(), s)
    }

    /// The disc `{v(T) <= b}` in the variable `T^-1`.
    pub fn inverse_disc(b: RationalVal) -> Result<Chart, SeriesError> {
        if b.is_infinite() {
            return Err(SeriesError::InvalidChart("-inf".into(), b));
        }
        Ok(Chart { a: None, b })
    }

    pub fn kind(&self) -> ChartKind {
        match (&self.a, &self.b) {
            (None, _) => ChartKind::InverseDisc,
            (Some(_), RationalVal::Infinity) => ChartKind::Disc,
            (Some(a), RationalVal::Finite(b)) if a == b => ChartKind::Circle,
            _ => ChartKind::Annulus,
        }
    }

    /// Outer bound `a` (`None` = `-inf`).
    pub fn outer(&self) -> Option<RationalVal> {
        self.a.clone().map(RationalVal::Finite)
    }

    /// Inner bound `b`.
    pub fn inner(&self) -> &RationalVal {
        &self.b
    }

    pub fn contains_val(&self, s: &RationalVal) -> bool {
        let above = match &self.a {
            None => true,
            Some(a) => &RationalVal::Finite(a.clone()) <= s,
        };
        above && s <= &self.b
    }

    /// `self ⊆ other` as point sets.
    pub fn is_within(&self, other: &Chart) -> bool {
        let outer_ok = match (&self.a, &other.a) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(x), Some(y)) => x >= y,
        };
        outer_ok && self.b <= other.b
    }

    /// Whether `T^i` is allowed on this chart.
    pub fn allows_exponent(&self, i: i64) -> bool {
        match self.kind() {
            ChartKind::Disc => i >= 0,
            ChartKind::InverseDisc => i <= 0,
            _ => true,
        }
    }

    /// Chart after `T = λ T'`, i.e. `v(T') = v(T) - v(λ)`.
    pub fn shifted(&self, by: &BigRational) -> Chart {
        Chart {
            a: self.a.as_ref().map(|a| a - by),
            b: &self.b - &RationalVal::Finite(by.clone()),
        }
    }

    /// `min` over the chart of `val + i * v(T)`, the sup-valuation of a monomial.
    pub fn monomial_sup_val(&self, val: &RationalVal, i: i64) -> RationalVal {
        if val.is_infinite() {
            return RationalVal::Infinity;
        }
        let at = |s: &RationalVal| val + &s.mul_int(i);
        match i.signum() {
            0 => val.clone(),
            1 => match &self.a {
                Some(a) => at(&RationalVal::Finite(a.clone())),
                None => panic!("positive exponent on an inverse disc"),
            },
            _ => {
                assert!(self.b.is_finite(), "negative exponent on a disc");
                at(&self.b)
            }
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.a {
            None => write!(f, "[-inf,{}]", self.b),
            Some(a) => write!(f, "[{},{}]", RationalVal::Finite(a.clone()), self.b),
        }
    }
}

/// A Laurent series `Σ c_i T^i`, `i ∈ [-D, D]`, on a chart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries", into = "RawSeries")]
pub struct LaurentSeries {
    ctx: PadicContext,
    chart: Chart,
    window: u32,
    coeffs: Vec<PadicScalar>,
    truncated: Option<RationalVal>,
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    context: PadicContext,
    chart: Chart,
    window: u32,
    coeffs: Vec<(i64, PadicScalar)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    truncated: Option<RationalVal>,
}

impl From<LaurentSeries> for RawSeries {
    fn from(f: LaurentSeries) -> Self {
        let coeffs = f.terms().map(|(i, c)| (i, *c)).collect();
        RawSeries { context: f.ctx, chart: f.chart, window: f.window, coeffs, truncated: f.truncated }
    }
}

impl TryFrom<RawSeries> for LaurentSeries {
    type Error = SeriesError;
    fn try_from(raw: RawSeries) -> Result<Self, SeriesError> {
        let mut f = LaurentSeries::from_terms(raw.context, raw.chart, raw.window, raw.coeffs)?;
        f.truncated = raw.truncated;
        Ok(f)
    }
}

fn min_opt(a: Option<RationalVal>, b: Option<RationalVal>) -> Option<RationalVal> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl LaurentSeries {
    pub fn zero(ctx: PadicContext, chart: Chart, window: u32) -> LaurentSeries {
        LaurentSeries {
            ctx,
            chart,
            window,
            coeffs: vec![ctx.zero(); 2 * window as usize + 1],
            truncated: None,
        }
    }

    pub fn constant(c: PadicScalar, chart: Chart, window: u32) -> LaurentSeries {
        let mut f = LaurentSeries::zero(c.context(), chart, window);
        f.coeffs[window as usize] = c;
        f
    }

    pub fn one(ctx: PadicContext, chart: Chart, window: u32) -> LaurentSeries {
        LaurentSeries::constant(ctx.one(), chart, window)
    }

    /// Build from `(exponent, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms(
        ctx: PadicContext,
        chart: Chart,
        window: u32,
        terms: impl IntoIterator<Item = (i64, PadicScalar)>,
    ) -> Result<LaurentSeries, SeriesError> {
        let mut f = LaurentSeries::zero(ctx, chart, window);
        for (i, c) in terms {
            if i.unsigned_abs() > window as u64 {
                return Err(SeriesError::OutsideWindow(i, window));
            }
            if c.is_exact_zero() {
                continue;
            }
            if !f.chart.allows_exponent(i) {
                return Err(SeriesError::Support(i, f.chart.clone()));
            }
            let slot = f.slot(i);
            f.coeffs[slot] = f.coeffs[slot].checked_add(&c)?;
        }
        Ok(f)
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_ints(
        ctx: PadicContext,
        chart: Chart,
        window: u32,
        terms: &[(i64, i64)],
    ) -> Result<LaurentSeries, SeriesError> {
        LaurentSeries::from_terms(ctx, chart, window, terms.iter().map(|&(i, c)| (i, ctx.from_int(c))))
    }

    #[inline]
    fn slot(&self, i: i64) -> usize {
        (i + self.window as i64) as usize
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Coefficient of `T^i` (exact zero outside the window).
    pub fn coeff(&self, i: i64) -> PadicScalar {
        if i.unsigned_abs() > self.window as u64 {
            self.ctx.zero()
        } else {
            self.coeffs[self.slot(i)]
        }
    }

    /// Stored terms, skipping exact zeros, in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &PadicScalar)> + '_ {
        let d = self.window as i64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(move |(k, c)| (k as i64 - d, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated.is_some()
    }

    /// Lower bound for the sup-valuation of mass dropped by the window.
    pub fn truncation_val(&self) -> Option<&RationalVal> {
        self.truncated.as_ref()
    }

    fn check_s(&self, s: &RationalVal) -> Result<(), SeriesError> {
        if self.chart.contains_val(s) {
            Ok(())
        } else {
            Err(SeriesError::OutOfChart(s.clone(), self.chart.clone()))
        }
    }

    fn gauss_with(&self, s: &RationalVal, val: impl Fn(&PadicScalar) -> RationalVal) -> RationalVal {
        let mut best = RationalVal::Infinity;
        for (i, c) in self.terms() {
            let v = val(c);
            if v.is_infinite() {
                continue;
            }
            let term = if i == 0 {
                v
            } else if s.is_infinite() {
                // only reachable on discs, where i > 0
                continue;
            } else {
                &v + &s.mul_int(i)
            };
            if term < best {
                best = term;
            }
        }
        best
    }

    /// Gauss valuation `min_i (v(c_i) + i s)` at `v(T) = s`.
    pub fn gauss_val(&self, s: &RationalVal) -> Result<RationalVal, SeriesError> {
        self.check_s(s)?;
        Ok(self.gauss_with(s, PadicScalar::val))
    }

    /// Like [`gauss_val`](Self::gauss_val), but inexact zero coefficients `O(p^k)`
    /// count with valuation `k`: the result is a guaranteed lower bound.
    pub fn certified_gauss_val(&self, s: &RationalVal) -> Result<RationalVal, SeriesError> {
        self.check_s(s)?;
        Ok(self.gauss_with(s, PadicScalar::certified_val))
    }

    fn sup_with(&self, val: impl Fn(&PadicScalar) -> RationalVal + Copy) -> RationalVal {
        // s -> gauss_val(f, s) is concave, so the sup norm is attained at an end.
        let a = self.chart.outer();
        let b = self.chart.inner().clone();
        match (a, self.chart.kind()) {
            (Some(a), ChartKind::Disc) => self.gauss_with(&a, val),
            (None, _) => self.gauss_with(&b, val),
            (Some(a), _) => self.gauss_with(&a, val).min(self.gauss_with(&b, val)),
        }
    }

    /// Valuation of the supremum seminorm over the chart.
    pub fn sup_val(&self) -> RationalVal {
        self.sup_with(PadicScalar::val)
    }

    pub fn certified_sup_val(&self) -> RationalVal {
        self.sup_with(PadicScalar::certified_val)
    }

    pub fn is_power_bounded(&self) -> bool {
        self.sup_val() >= RationalVal::zero()
    }

    fn check_compatible(&self, other: &LaurentSeries) -> Result<(), SeriesError> {
        if self.chart != other.chart {
            return Err(SeriesError::ChartMismatch(self.chart.clone(), other.chart.clone()));
        }
        if self.window != other.window {
            return Err(SeriesError::WindowMismatch(self.window, other.window));
        }
        if self.ctx != other.ctx {
            return Err(PadicError::ContextMismatch(self.ctx, other.ctx).into());
        }
        Ok(())
    }

    pub fn add(&self, other: &LaurentSeries) -> Result<LaurentSeries, SeriesError> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| *a + *b).collect();
        Ok(LaurentSeries {
            ctx: self.ctx,
            chart: self.chart.clone(),
            window: self.window,
            coeffs,
            truncated: min_opt(self.truncated.clone(), other.truncated.clone()),
        })
    }

    pub fn neg(&self) -> LaurentSeries {
        LaurentSeries {
            coeffs: self.coeffs.iter().map(|c| -*c).collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &LaurentSeries) -> Result<LaurentSeries, SeriesError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &PadicScalar) -> LaurentSeries {
        let cv = c.val();
        LaurentSeries {
            coeffs: self.coeffs.iter().map(|x| *x * *c).collect(),
            truncated: self.truncated.as_ref().map(|t| t + &cv),
            ..self.clone()
        }
    }

    /// Product truncated to the window; dropped cross terms set the
    /// truncation bound.
    pub fn mul(&self, other: &LaurentSeries) -> Result<LaurentSeries, SeriesError> {
        self.check_compatible(other)?;
        let d = self.window as i64;
        let lhs: Vec<(i64, PadicScalar)> = self.terms().map(|(i, c)| (i, *c)).collect();
        let rhs: Vec<(i64, PadicScalar)> = other.terms().map(|(i, c)| (i, *c)).collect();
        let mut out = vec![self.ctx.zero(); self.coeffs.len()];
        // lowest certified valuation dropped at each out-of-window exponent
        let mut dropped: Vec<(i64, i64)> = Vec::new();
        for &(i, a) in &lhs {
            for &(j, b) in &rhs {
                let k = i + j;
                let prod = a * b;
                if k.abs() > d {
                    if let Some(v) = prod.certified_valuation() {
                        match dropped.iter_mut().find(|(e, _)| *e == k) {
                            Some(slot) => slot.1 = slot.1.min(v),
                            None => dropped.push((k, v)),
                        }
                    }
                } else {
                    let s = (k + d) as usize;
                    out[s] = out[s] + prod;
                }
            }
        }
        let mut truncated = min_opt(
            self.truncated.as_ref().map(|t| t + &other.certified_sup_val()),
            other.truncated.as_ref().map(|t| t + &self.certified_sup_val()),
        );
        for (k, v) in dropped {
            truncated = min_opt(truncated, Some(self.chart.monomial_sup_val(&RationalVal::from_int(v), k)));
        }
        Ok(LaurentSeries { ctx: self.ctx, chart: self.chart.clone(), window: self.window, coeffs: out, truncated })
    }

    /// The same coefficients viewed on a smaller chart.
    pub fn restrict(&self, sub: &Chart) -> Result<LaurentSeries, SeriesError> {
        if !sub.is_within(&self.chart) {
            return Err(SeriesError::NotNested { sub: sub.clone(), chart: self.chart.clone() });
        }
        Ok(LaurentSeries { chart: sub.clone(), ..self.clone() })
    }

    /// Substitute `T = λ T'`: the coefficient of `T'^i` is `λ^i c_i`.
    ///
    /// The chart is moved so the underlying point set is unchanged: with
    /// `v(T') = v(T) - v(λ)`, bounds `[a, b]` become `[a - v(λ), b - v(λ)]`.
    pub fn scale_variable(&self, lambda: &PadicScalar) -> Result<LaurentSeries, SeriesError> {
        if lambda.is_zero() {
            return Err(SeriesError::ZeroScale);
        }
        let vl = lambda.val();
        let by = vl.finite().expect("nonzero").clone();
        let mut coeffs = self.coeffs.clone();
        let d = self.window as i64;
        for (k, c) in coeffs.iter_mut().enumerate() {
            if !c.is_exact_zero() {
                *c = c.checked_mul(&lambda.pow(k as i64 - d)?)?;
            }
        }
        Ok(LaurentSeries {
            ctx: self.ctx,
            chart: self.chart.shifted(&by),
            window: self.window,
            coeffs,
            truncated: self.truncated.clone(),
        })
    }

    /// Split a series on a circle `[s, s]` as `f = f_plus - f_minus` with
    /// `f_plus` on the disc `{v(T) >= s}` (exponents `>= 0`) and `f_minus` on the
    /// disc in `T^-1` `{v(T) <= s}` (exponents `< 0`). The split is isometric:
    /// both parts have sup-valuation at least that of `f`.
    pub fn split_laurent(&self) -> Result<(LaurentSeries, LaurentSeries), SeriesError> {
        if self.chart.kind() != ChartKind::Circle {
            return Err(SeriesError::NotCircle(self.chart.clone()));
        }
        let s = self.chart.inner().clone();
        let mut plus = LaurentSeries::zero(self.ctx, Chart::disc(s.clone())?, self.window);
        let mut minus = LaurentSeries::zero(self.ctx, Chart::inverse_disc(s)?, self.window);
        let d = self.window as usize;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k >= d {
                plus.coeffs[k] = *c;
            } else {
                minus.coeffs[k] = -*c;
            }
        }
        plus.truncated = self.truncated.clone();
        minus.truncated = self.truncated.clone();
        Ok((plus, minus))
    }

    /// Replace every coefficient whose certified sup-valuation on the chart is
    /// at least `cap` by an exact zero, i.e. compute modulo the ball of
    /// sup-valuation `>= cap`.
    pub fn drop_negligible(&mut self, cap: &RationalVal) {
        let d = self.window as i64;
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            if c.is_exact_zero() {
                continue;
            }
            if &self.chart.monomial_sup_val(&c.certified_val(), k as i64 - d) >= cap {
                *c = self.ctx.zero();
            }
        }
    }

    /// Same series on a different window; shrinking drops terms and records it.
    pub fn with_window(&self, window: u32) -> LaurentSeries {
        let mut out = LaurentSeries::zero(self.ctx, self.chart.clone(), window);
        out.truncated = self.truncated.clone();
        for (i, c) in self.terms() {
            if i.unsigned_abs() <= window as u64 {
                let s = out.slot(i);
                out.coeffs[s] = *c;
            } else {
                let t = self.chart.monomial_sup_val(&c.certified_val(), i);
                out.truncated = min_opt(out.truncated.take(), Some(t));
            }
        }
        out
    }

    /// Evaluate at a scalar `c` with `v(c)` in the chart.
    pub fn evaluate(&self, c: &PadicScalar) -> Result<PadicScalar, SeriesError> {
        if c.is_zero() {
            if self.chart.kind() != ChartKind::Disc {
                return Err(SeriesError::OutOfChart(RationalVal::Infinity, self.chart.clone()));
            }
            return Ok(self.coeff(0));
        }
        self.check_s(&c.val())?;
        let mut acc = self.ctx.zero();
        for (i, a) in self.terms() {
            acc = acc.checked_add(&(*a * c.pow(i)?))?;
        }
        Ok(acc)
    }

    /// Largest `|i|` with a stored nonzero coefficient.
    pub fn support_radius(&self) -> u32 {
        self.terms().map(|(i, _)| i.unsigned_abs() as u32).max().unwrap_or(0)
    }

}

fn render_coeff(c: &PadicScalar) -> String {
    if c.is_zero() {
        return c.to_string();
    }
    let v = c.valuation().expect("nonzero");
    let u = c.balanced_unit();
    let p = c.context().prime();
    if v >= 0 {
        if let Some(n) = (p as i64).checked_pow(v as u32).and_then(|pv| pv.checked_mul(u)) {
            if n.abs() < 1_000_000_000 {
                return n.to_string();
            }
        }
        return format!("{u}*{p}^{v}");
    }
    format!("{u}/{p}^{}", -v)
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms()
            .map(|(i, c)| {
                let c = render_coeff(c);
                let mono = if i == 1 { "T".to_string() } else { format!("T^{i}") };
                match (i, c.as_str()) {
                    (0, _) => c,
                    (_, "1") => mono,
                    (_, "-1") => format!("-{mono}"),
                    _ => format!("{c}*{mono}"),
                }
            })
            .collect();
        if parts.is_empty() {
            f.write_str("0")?;
        } else {
            f.write_str(&parts.join(" + "))?;
        }
        write!(f, " on chart {}", self.chart)
    }
}

/// `min` of a finite list of values, `+inf` if empty.
pub fn min_val<'a>(vals: impl IntoIterator<Item = &'a RationalVal>) -> RationalVal {
    vals.into_iter().cloned().min().unwrap_or(RationalVal::Infinity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c5() -> PadicContext {
        PadicContext::new(5, 10).unwrap()
    }

    fn v(n: i64) -> RationalVal {
        RationalVal::from_int(n)
    }

    fn annulus(a: i64, b: i64) -> Chart {
        Chart::annulus(v(a), v(b)).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(Chart::new(v(2), v(1)).is_err());
        assert!(Chart::circle(RationalVal::Infinity).is_err());
        assert!(Chart::inverse_disc(RationalVal::Infinity).is_err());
        assert_eq!(Chart::unit_disc().kind(), ChartKind::Disc);
        assert_eq!(Chart::circle(v(1)).unwrap().kind(), ChartKind::Circle);
        assert!(Chart::circle(v(1)).unwrap().is_within(&annulus(0, 1)));
        assert!(!annulus(0, 2).is_within(&annulus(0, 1)));
        assert!(annulus(0, 2).is_within(&Chart::unit_disc()));
    }

    #[test]
    fn gauss_val_examples() {
        let f = LaurentSeries::from_ints(c5(), Chart::unit_disc(), 4, &[(0, 5), (2, 1)]).unwrap();
        assert_eq!(f.gauss_val(&v(0)).unwrap(), v(0));
        assert_eq!(f.gauss_val(&v(1)).unwrap(), v(1));
        assert_eq!(f.gauss_val(&RationalVal::ratio(1, 3)).unwrap(), RationalVal::ratio(2, 3));
        let zero = LaurentSeries::zero(c5(), Chart::unit_disc(), 4);
        assert_eq!(zero.gauss_val(&v(7)).unwrap(), RationalVal::Infinity);
        let g = LaurentSeries::from_ints(c5(), annulus(0, 1), 4, &[(0, 1)]).unwrap();
        assert!(matches!(g.gauss_val(&v(2)), Err(SeriesError::OutOfChart(..))));
    }

    #[test]
    fn sup_val_examples() {
        let f = LaurentSeries::from_ints(c5(), annulus(0, 1), 4, &[(0, 5), (2, 1)]).unwrap();
        assert_eq!(f.sup_val(), v(0));
        let g = LaurentSeries::from_ints(c5(), annulus(0, 1), 4, &[(-1, 5)]).unwrap();
        assert_eq!(g.sup_val(), v(0));
        assert!(g.is_power_bounded());
        let t = LaurentSeries::from_ints(c5(), Chart::unit_disc(), 4, &[(1, 1)]).unwrap();
        assert_eq!(t.sup_val(), v(0));
        assert!(t.restrict(&annulus(0, 1)).unwrap().is_power_bounded());
        let fifth = LaurentSeries::constant(c5().parse("1/5").unwrap(), Chart::unit_disc(), 4);
        assert!(!fifth.is_power_bounded());
    }

    #[test]
    fn support_rules() {
        assert!(matches!(
            LaurentSeries::from_ints(c5(), Chart::unit_disc(), 4, &[(-1, 1)]),
            Err(SeriesError::Support(-1, _))
        ));
        assert!(matches!(
            LaurentSeries::from_ints(c5(), annulus(0, 1), 2, &[(3, 1)]),
            Err(SeriesError::OutsideWindow(3, 2))
        ));
    }

    #[test]
    fn multiplication_examples() {
        let ch = annulus(0, 1);
        let a = LaurentSeries::from_ints(c5(), ch.clone(), 4, &[(0, 1), (1, 1)]).unwrap();
        let b = LaurentSeries::from_ints(c5(), ch.clone(), 4, &[(0, 1), (1, -1)]).unwrap();
        let expect = LaurentSeries::from_ints(c5(), ch.clone(), 4, &[(0, 1), (2, -1)]).unwrap();
        let prod = a.mul(&b).unwrap();
        assert!(prod.sub(&expect).unwrap().is_zero());
        assert!(!prod.is_truncated());
        let zero = LaurentSeries::zero(c5(), ch.clone(), 4);
        assert!(a.mul(&zero).unwrap().is_zero());

        let w = LaurentSeries::from_ints(c5(), ch.clone(), 2, &[(1, 1), (2, 1)]).unwrap();
        let sq = w.mul(&w).unwrap();
        let t2 = LaurentSeries::from_ints(c5(), ch.clone(), 2, &[(2, 1)]).unwrap();
        assert_eq!(sq, LaurentSeries { truncated: sq.truncated.clone(), ..t2 });
        assert!(sq.is_truncated());
        // dropped 2T^3 + T^4 has sup-valuation 0 on [0, 1]
        assert_eq!(sq.truncation_val(), Some(&v(0)));

        let other = LaurentSeries::zero(c5(), annulus(0, 2), 4);
        assert!(matches!(a.mul(&other), Err(SeriesError::ChartMismatch(..))));
    }

    #[test]
    fn restriction_examples() {
        let f = LaurentSeries::from_ints(c5(), annulus(0, 1), 3, &[(-1, 5), (0, 3)]).unwrap();
        let circ = Chart::circle(v(1)).unwrap();
        let r = f.restrict(&circ).unwrap();
        assert_eq!(r.chart(), &circ);
        assert_eq!(r.coeff(-1), f.coeff(-1));
        assert_eq!(f.restrict(f.chart()).unwrap(), f);
        let g = LaurentSeries::from_ints(c5(), Chart::unit_disc(), 3, &[(2, 1)]).unwrap();
        let h = g.restrict(&annulus(0, 2)).unwrap();
        assert!(h.terms().all(|(i, _)| i >= 0));
        assert!(matches!(f.restrict(&annulus(0, 2)), Err(SeriesError::NotNested { .. })));
    }

    #[test]
    fn scale_variable_examples() {
        let ctx = c5();
        let circ0 = Chart::circle(v(0)).unwrap();
        let t = LaurentSeries::from_ints(ctx, circ0.clone(), 3, &[(1, 1)]).unwrap();
        assert_eq!(t.scale_variable(&ctx.one()).unwrap(), t);
        let s = t.scale_variable(&ctx.from_int(5)).unwrap();
        assert_eq!(s.chart(), &Chart::circle(v(-1)).unwrap());
        assert_eq!(s.coeff(1), ctx.from_int(5));
        let one = LaurentSeries::one(ctx, circ0, 3);
        let moved = one.scale_variable(&ctx.from_int(25)).unwrap();
        assert_eq!(moved.coeff(0), ctx.one());
        assert_eq!(moved.chart(), &Chart::circle(v(-2)).unwrap());
        assert_eq!(t.scale_variable(&ctx.zero()), Err(SeriesError::ZeroScale));
    }

    #[test]
    fn split_examples() {
        let ctx = c5();
        let circ = Chart::circle(v(0)).unwrap();
        let f = LaurentSeries::from_ints(ctx, circ.clone(), 3, &[(0, 3), (1, 1), (-1, 5)]).unwrap();
        let (plus, minus) = f.split_laurent().unwrap();
        assert_eq!(plus.coeff(0), ctx.from_int(3));
        assert_eq!(plus.coeff(1), ctx.one());
        assert_eq!(minus.coeff(-1), ctx.from_int(-5));
        assert_eq!(plus.chart().kind(), ChartKind::Disc);
        assert_eq!(minus.chart().kind(), ChartKind::InverseDisc);

        let (p0, m0) = LaurentSeries::zero(ctx, circ.clone(), 3).split_laurent().unwrap();
        assert!(p0.is_zero() && m0.is_zero());

        let g = LaurentSeries::from_ints(ctx, circ, 3, &[(-2, 1)]).unwrap();
        let (p, m) = g.split_laurent().unwrap();
        assert!(p.is_zero());
        assert_eq!(m.coeff(-2), ctx.from_int(-1));

        let ann = LaurentSeries::zero(ctx, annulus(0, 1), 3);
        assert!(matches!(ann.split_laurent(), Err(SeriesError::NotCircle(_))));
    }

    #[test]
    fn rendering_and_json() {
        let ctx = c5();
        let f = LaurentSeries::from_ints(ctx, annulus(0, 1), 3, &[(0, 3), (1, 1), (-1, 5)]).unwrap();
        assert_eq!(f.to_string(), "5*T^-1 + 3 + T on chart [0,1]");
        let j = serde_json::to_string(&f).unwrap();
        let back: LaurentSeries = serde_json::from_str(&j).unwrap();
        assert_eq!(back, f);
        let inv = Chart::inverse_disc(v(0)).unwrap();
        let j = serde_json::to_string(&inv).unwrap();
        assert_eq!(j, r#"{"a":null,"b":0}"#);
    }

    #[test]
    fn evaluation() {
        let ctx = c5();
        let f = LaurentSeries::from_ints(ctx, annulus(-1, 1), 3, &[(0, 3), (1, 1), (-1, 5)]).unwrap();
        // f(5) = 3 + 5 + 1
        assert_eq!(f.evaluate(&ctx.from_int(5)).unwrap(), ctx.from_int(9));
        assert!(f.evaluate(&ctx.from_int(125)).is_err());
    }

    fn small_series(ch: Chart, window: u32) -> impl Strategy<Value = LaurentSeries> {
        let lo = if ch.allows_exponent(-1) { -(window as i64) / 2 } else { 0 };
        let hi = (window as i64) / 2;
        proptest::collection::vec((lo..=hi, -2i64..4, 1i64..200), 0..5).prop_map(move |terms| {
            let ctx = c5();
            LaurentSeries::from_terms(
                ctx,
                ch.clone(),
                window,
                terms.into_iter().filter(|t| t.2 % 5 != 0).map(|(i, val, u)| (i, ctx.from_parts(val, u))),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn gauss_multiplicativity(
            f in small_series(annulus(0, 2), 8),
            g in small_series(annulus(0, 2), 8),
            s in 0i64..=4,
        ) {
            let s = RationalVal::ratio(s, 2);
            let fg = f.mul(&g).unwrap();
            prop_assume!(!fg.is_truncated());
            prop_assert_eq!(
                fg.gauss_val(&s).unwrap(),
                &f.gauss_val(&s).unwrap() + &g.gauss_val(&s).unwrap()
            );
        }

        #[test]
        fn concavity_endpoint_rule(f in small_series(annulus(-1, 3), 8), s in -3i64..=9) {
            let s = RationalVal::ratio(s, 3);
            prop_assert!(f.gauss_val(&s).unwrap() >= f.sup_val());
        }

        #[test]
        fn split_round_trip(f in small_series(Chart::circle(RationalVal::ratio(1, 2)).unwrap(), 8)) {
            let (plus, minus) = f.split_laurent().unwrap();
            let circ = f.chart().clone();
            let back = plus.restrict(&circ).unwrap().sub(&minus.restrict(&circ).unwrap()).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert!(plus.sup_val() >= f.sup_val());
            prop_assert!(minus.sup_val() >= f.sup_val());
            if f.is_power_bounded() {
                prop_assert!(plus.is_power_bounded() && minus.is_power_bounded());
            }
        }

        #[test]
        fn scale_variable_round_trip(f in small_series(annulus(0, 2), 6), k in -2i64..3, u in 1i64..24) {
            prop_assume!(u % 5 != 0);
            let ctx = c5();
            let lambda = ctx.from_parts(k, u);
            let back = f.scale_variable(&lambda).unwrap().scale_variable(&lambda.inv().unwrap()).unwrap();
            prop_assert_eq!(back.chart(), f.chart());
            prop_assert!(back.sub(&f).unwrap().is_zero());
        }
    }
}
