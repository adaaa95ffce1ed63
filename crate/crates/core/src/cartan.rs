//! Cartan factorization of matrices near the identity over a circle.
//!
//! The cover is the projective-line Laurent pair: series in `T` on the disc
//! `{v(T) >= s}`, series in `T^-1` on `{v(T) <= s}`, and Laurent series on the
//! circle `v(T) = s`. Given `B = 1 + V_1` on the circle with `val(V_1) > 0`,
//! the iteration
//!
//! ```text
//!   V_n = C_n - D_n                         (split: C_n exps >= 0, D_n exps < 0)
//!   1 + V_{n+1} = (1 - C_n)(1 + V_n)(1 + D_n)
//! ```
//!
//! kills the first-order error at every step, so `val(V_{n+1}) >= 2 val(V_n)`.
//! With `P = ... (1 - C_2)(1 - C_1)` and `Q = (1 + D_1)(1 + D_2) ...` we get
//! `P B Q = 1`, hence `B = B1* B2*` with `B1* = P^-1` (entries in `T`) and
//! `B2* = Q^-1` (entries in `T^-1`).
//!
//! Splitting on a circle is isometric, so the decay constant of the general
//! argument is `1` and positivity of `val(B - 1)` is the whole precondition.
//!
//! Computations run modulo the ball of sup-valuation `>= N` (the working
//! precision): coefficients below that are dropped, and all reported
//! valuations are certified lower bounds capped at `N`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{PadicContext, PadicScalar};
use crate::series::{Chart, ChartKind, LaurentSeries, SeriesError};
use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CartanError {
    #[error("val(B - 1) = {0} is not positive")]
    NotNearIdentity(RationalVal),
    #[error("no convergence after {iterations} iterations (trace [{}], target {target})", join_vals(trace))]
    NonConvergence { iterations: usize, trace: Vec<RationalVal>, target: RationalVal },
    #[error("Neumann series for a near-identity inverse did not converge")]
    InverseDiverged,
    #[error("matrix must be square with a common circle chart and window")]
    Shape,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

fn join_vals(v: &[RationalVal]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// An `n x n` matrix of Laurent series sharing one chart and window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentMatrix {
    n: usize,
    entries: Vec<LaurentSeries>,
}

impl LaurentMatrix {
    pub fn from_entries(n: usize, entries: Vec<LaurentSeries>) -> Result<Self, CartanError> {
        if n == 0 || entries.len() != n * n {
            return Err(CartanError::Shape);
        }
        let (chart, window, ctx) = (entries[0].chart(), entries[0].window(), entries[0].context());
        if entries.iter().any(|e| e.chart() != chart || e.window() != window || e.context() != ctx) {
            return Err(CartanError::Shape);
        }
        Ok(LaurentMatrix { n, entries })
    }

    pub fn identity(ctx: PadicContext, n: usize, chart: Chart, window: u32) -> Self {
        let entries = (0..n * n)
            .map(|k| {
                if k / n == k % n {
                    LaurentSeries::one(ctx, chart.clone(), window)
                } else {
                    LaurentSeries::zero(ctx, chart.clone(), window)
                }
            })
            .collect();
        LaurentMatrix { n, entries }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &LaurentSeries {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[LaurentSeries] {
        &self.entries
    }

    pub fn chart(&self) -> &Chart {
        self.entries[0].chart()
    }

    pub fn window(&self) -> u32 {
        self.entries[0].window()
    }

    pub fn context(&self) -> PadicContext {
        self.entries[0].context()
    }

    fn map(&self, f: impl Fn(&LaurentSeries) -> Result<LaurentSeries, SeriesError>) -> Result<Self, CartanError> {
        let entries = self.entries.iter().map(f).collect::<Result<_, _>>()?;
        Ok(LaurentMatrix { n: self.n, entries })
    }

    fn zip(
        &self,
        other: &Self,
        f: impl Fn(&LaurentSeries, &LaurentSeries) -> Result<LaurentSeries, SeriesError>,
    ) -> Result<Self, CartanError> {
        if self.n != other.n {
            return Err(CartanError::Shape);
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect::<Result<_, _>>()?;
        Ok(LaurentMatrix { n: self.n, entries })
    }

    pub fn add(&self, other: &Self) -> Result<Self, CartanError> {
        self.zip(other, LaurentSeries::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, CartanError> {
        self.zip(other, LaurentSeries::sub)
    }

    pub fn neg(&self) -> Self {
        LaurentMatrix { n: self.n, entries: self.entries.iter().map(LaurentSeries::neg).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CartanError> {
        if self.n != other.n {
            return Err(CartanError::Shape);
        }
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.get(i, 0).mul(other.get(0, j))?;
                for k in 1..n {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j))?)?;
                }
                entries.push(acc);
            }
        }
        Ok(LaurentMatrix { n, entries })
    }

    pub fn restrict(&self, chart: &Chart) -> Result<Self, CartanError> {
        self.map(|e| e.restrict(chart))
    }

    pub fn with_window(&self, window: u32) -> Self {
        self.map(|e| Ok(e.with_window(window))).expect("infallible")
    }

    pub fn is_truncated(&self) -> bool {
        self.entries.iter().any(LaurentSeries::is_truncated)
    }

    /// Lowest truncation bound over the entries.
    pub fn truncation_val(&self) -> Option<RationalVal> {
        self.entries.iter().filter_map(|e| e.truncation_val().cloned()).min()
    }

    fn drop_negligible(&mut self, cap: &RationalVal) {
        for e in &mut self.entries {
            e.drop_negligible(cap);
        }
    }

    /// Determinant by cofactor expansion (fine for the small sizes used here).
    pub fn det(&self) -> Result<LaurentSeries, CartanError> {
        fn minor(m: &LaurentMatrix, skip_row: usize, skip_col: usize) -> LaurentMatrix {
            let n = m.n;
            let entries = (0..n)
                .filter(|&i| i != skip_row)
                .flat_map(|i| (0..n).filter(move |&j| j != skip_col).map(move |j| m.get(i, j).clone()))
                .collect();
            LaurentMatrix { n: n - 1, entries }
        }
        if self.n == 1 {
            return Ok(self.entries[0].clone());
        }
        let mut acc = LaurentSeries::zero(self.context(), self.chart().clone(), self.window());
        for j in 0..self.n {
            let term = self.get(0, j).mul(&minor(self, 0, j).det()?)?;
            acc = if j % 2 == 0 { acc.add(&term)? } else { acc.sub(&term)? };
        }
        Ok(acc)
    }
}

/// `min` over the entries of the sup-valuation; `+inf` iff the matrix is zero.
pub fn matrix_sup_val(m: &LaurentMatrix) -> RationalVal {
    m.entries.iter().map(LaurentSeries::sup_val).min().expect("nonempty")
}

/// Like [`matrix_sup_val`] but counting `O(p^k)` coefficients at valuation `k`.
pub fn matrix_certified_val(m: &LaurentMatrix) -> RationalVal {
    m.entries.iter().map(LaurentSeries::certified_sup_val).min().expect("nonempty")
}

/// Output of [`cartan_factor`]: `B = b1 * b2` on the circle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationResult {
    /// Entries are series in `T` on the disc `{v(T) >= s}`.
    pub b1: LaurentMatrix,
    /// Entries are series in `T^-1` on `{v(T) <= s}`.
    pub b2: LaurentMatrix,
    /// `Q = (1 + D_1)(1 + D_2) ...`, the inverse of `b2`.
    pub b2_inverse: LaurentMatrix,
    pub iterations: usize,
    /// Certified valuation of `b1 * b2 - B`, recomputed by multiplication.
    pub residual_val: RationalVal,
    /// Certified `val(V_1)`.
    pub initial_val: RationalVal,
    /// Certified `val(V_n)` for `n = 2, 3, ...`, one entry per iteration,
    /// capped at the working precision.
    pub decay_trace: Vec<RationalVal>,
    pub effective_window: u32,
    /// Set when window truncation dropped mass below the working cap.
    pub truncation_contaminated: bool,
}

/// JSON summary without the matrices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationSummary {
    pub n: usize,
    pub iterations: usize,
    pub residual_val: RationalVal,
    pub decay_trace: Vec<RationalVal>,
    pub effective_window: u32,
    pub truncation_contaminated: bool,
}

impl FactorizationResult {
    pub fn summary(&self) -> FactorizationSummary {
        FactorizationSummary {
            n: self.b1.size(),
            iterations: self.iterations,
            residual_val: self.residual_val.clone(),
            decay_trace: self.decay_trace.clone(),
            effective_window: self.effective_window,
            truncation_contaminated: self.truncation_contaminated,
        }
    }
}

impl fmt::Display for LaurentMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            for j in 0..self.n {
                writeln!(f, "[{},{}] {}", i + 1, j + 1, self.get(i, j))?;
            }
        }
        Ok(())
    }
}

fn circle_of(m: &LaurentMatrix) -> Result<Chart, CartanError> {
    if m.chart().kind() != ChartKind::Circle {
        return Err(SeriesError::NotCircle(m.chart().clone()).into());
    }
    Ok(m.chart().clone())
}

/// `I - M` inverted by the finite Neumann series `sum M^k`, computed modulo
/// sup-valuation `cap`. Requires `val(M) > 0`.
fn neumann_inverse_of_one_minus(m: &LaurentMatrix, cap: &RationalVal) -> Result<LaurentMatrix, CartanError> {
    let chart = m.chart().clone();
    let id = LaurentMatrix::identity(m.context(), m.n, chart, m.window());
    let vm = matrix_certified_val(m);
    if !vm.is_positive() {
        return Err(CartanError::InverseDiverged);
    }
    let mut sum = id.clone();
    let mut power = id;
    // val(M^k) >= k val(M) reaches the cap after at most cap / val(M) terms
    let bound = match (cap.finite(), vm.finite()) {
        (Some(c), Some(v)) => (c / v).ceil().to_integer().try_into().unwrap_or(usize::MAX).saturating_add(1),
        _ => 1,
    };
    for _ in 0..bound {
        power = power.mul(m)?;
        power.drop_negligible(cap);
        if matrix_certified_val(&power) >= *cap {
            return Ok(sum);
        }
        sum = sum.add(&power)?;
    }
    if matrix_certified_val(&power.mul(m)?) >= *cap {
        Ok(sum)
    } else {
        Err(CartanError::InverseDiverged)
    }
}

/// Default iteration budget: `target / val(V_1) + 4`.
pub fn default_max_iter(target: &RationalVal, v1: &RationalVal) -> usize {
    match (target.finite(), v1.finite()) {
        (Some(t), Some(v)) if v > &num_rational::BigRational::from_integer(0.into()) => {
            (t / v).ceil().to_integer().try_into().unwrap_or(usize::MAX / 2) + 4
        }
        _ => 4,
    }
}

/// Factor `B = B1* B2*` with `B1*` over the disc in `T` and `B2*` over the disc
/// in `T^-1`.
///
/// Stops when `val(V_n) >= target` or when window truncation leaks mass above
/// the working cap. The returned `residual_val` is recomputed from the
/// product, never taken from the iteration.
pub fn cartan_factor(
    b: &LaurentMatrix,
    target: &RationalVal,
    max_iter: usize,
) -> Result<FactorizationResult, CartanError> {
    let circle = circle_of(b)?;
    let s = circle.inner().clone();
    let ctx = b.context();
    let n = b.size();
    let cap = RationalVal::from_int(ctx.precision() as i64);
    let window = b.window().saturating_mul(2);
    let b_wide = b.with_window(window);
    let id = LaurentMatrix::identity(ctx, n, circle.clone(), window);

    if b_wide == id {
        // exact identity input: nothing to factor, and no subtraction ever
        // turns 1 - 1 into O(p^N)
        let b1 = LaurentMatrix::identity(ctx, n, Chart::disc(s.clone())?, window);
        let b2 = LaurentMatrix::identity(ctx, n, Chart::inverse_disc(s)?, window);
        return Ok(FactorizationResult {
            b1,
            b2: b2.clone(),
            b2_inverse: b2,
            iterations: 0,
            residual_val: RationalVal::Infinity,
            initial_val: RationalVal::Infinity,
            decay_trace: Vec::new(),
            effective_window: window,
            truncation_contaminated: false,
        });
    }
    let mut v = b_wide.sub(&id)?;
    v.drop_negligible(&cap);
    let v1 = matrix_certified_val(&v);
    if !v1.is_positive() {
        return Err(CartanError::NotNearIdentity(v1));
    }

    let disc = Chart::disc(s.clone())?;
    let inv_disc = Chart::inverse_disc(s)?;
    let id_disc = LaurentMatrix::identity(ctx, n, disc, window);
    let id_inv = LaurentMatrix::identity(ctx, n, inv_disc, window);
    // Q = (1 + D_1) ... (1 + D_k); the C_k are kept to invert P factor by factor
    let mut q_acc = id_inv.clone();
    let mut cs: Vec<LaurentMatrix> = Vec::new();
    let mut trace: Vec<RationalVal> = Vec::new();
    let mut current = v1.clone();
    let mut contaminated = false;

    while current < *target && current < cap {
        if cs.len() >= max_iter {
            return Err(CartanError::NonConvergence { iterations: cs.len(), trace, target: target.clone() });
        }
        let (c, d) = split_matrix(&v)?;
        assert!(c.entries().iter().all(|e| e.terms().all(|(i, _)| i >= 0)), "C_n support");
        assert!(d.entries().iter().all(|e| e.terms().all(|(i, _)| i < 0)), "D_n support");
        let one_plus_d = id_inv.add(&d)?;
        let left = id_disc.sub(&c)?.restrict(&circle)?;
        let right = one_plus_d.restrict(&circle)?;
        let mut next = left.mul(&id.add(&v)?)?.mul(&right)?.sub(&id)?;
        next.drop_negligible(&cap);
        q_acc = q_acc.mul(&one_plus_d)?;
        q_acc.drop_negligible(&cap);
        cs.push(c);
        if next.truncation_val().is_some_and(|t| t < cap) {
            contaminated = true;
        }
        v = next;
        current = matrix_certified_val(&v).min(cap.clone());
        trace.push(current.clone());
        if contaminated {
            break;
        }
    }

    // B1* = P^-1 = (1 - C_1)^-1 (1 - C_2)^-1 ... and B2* = Q^-1
    let mut b1 = id_disc.clone();
    for c in &cs {
        b1 = b1.mul(&neumann_inverse_of_one_minus(c, &cap)?)?;
        b1.drop_negligible(&cap);
    }
    let b2 = if cs.is_empty() { id_inv } else { neumann_inverse_of_one_minus(&id_inv.sub(&q_acc)?, &cap)? };
    contaminated |= b1.truncation_val().is_some_and(|t| t < cap) || b2.truncation_val().is_some_and(|t| t < cap);

    let residual_val = factorization_residual(b, &b1, &b2)?;
    if residual_val < *target && !contaminated {
        return Err(CartanError::NonConvergence { iterations: cs.len(), trace, target: target.clone() });
    }
    Ok(FactorizationResult {
        b1,
        b2,
        b2_inverse: q_acc,
        iterations: cs.len(),
        residual_val,
        initial_val: v1,
        decay_trace: trace,
        effective_window: window,
        truncation_contaminated: contaminated,
    })
}

/// Split every entry of a circle matrix: `V = C - D`.
fn split_matrix(v: &LaurentMatrix) -> Result<(LaurentMatrix, LaurentMatrix), CartanError> {
    let mut cs = Vec::with_capacity(v.entries.len());
    let mut ds = Vec::with_capacity(v.entries.len());
    for e in &v.entries {
        let (plus, minus) = e.split_laurent()?;
        cs.push(plus);
        ds.push(minus);
    }
    // V = C - D, and the recursion multiplies by (1 + D) on the right
    Ok((LaurentMatrix { n: v.n, entries: cs }, LaurentMatrix { n: v.n, entries: ds }))
}

/// Certified valuation of `b1 * b2 - B` on the circle of `B`.
pub fn factorization_residual(
    b: &LaurentMatrix,
    b1: &LaurentMatrix,
    b2: &LaurentMatrix,
) -> Result<RationalVal, CartanError> {
    let circle = circle_of(b)?;
    let window = b1.window().max(b.window());
    let prod = b1.with_window(window).restrict(&circle)?.mul(&b2.with_window(window).restrict(&circle)?)?;
    residual_between(&prod, &b.with_window(window))
}

/// Certified valuation of `x - y`; identical entries count as exactly equal,
/// so an untouched identity is not demoted to `O(p^N)`.
fn residual_between(x: &LaurentMatrix, y: &LaurentMatrix) -> Result<RationalVal, CartanError> {
    let mut best = RationalVal::Infinity;
    for (a, b) in x.entries.iter().zip(&y.entries) {
        if a != b {
            best = best.min(a.sub(b)?.certified_sup_val());
        }
    }
    Ok(best)
}

/// Trivialization of the free module glued by `B`: `Y` over the disc in `T`,
/// `Z` over the disc in `T^-1`, with `Y = B Z` on the circle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trivialization {
    pub y: LaurentMatrix,
    pub z: LaurentMatrix,
    /// Certified valuation of `Y - B Z` on the circle.
    pub residual_val: RationalVal,
}

pub fn trivialize_glued_free_module(
    b: &LaurentMatrix,
    target: &RationalVal,
    max_iter: usize,
) -> Result<Trivialization, CartanError> {
    let f = cartan_factor(b, target, max_iter)?;
    let residual_val = trivialization_residual(b, &f.b1, &f.b2_inverse)?;
    Ok(Trivialization { y: f.b1, z: f.b2_inverse, residual_val })
}

/// Certified valuation of `Y - B Z` on the circle of `B`.
pub fn trivialization_residual(b: &LaurentMatrix, y: &LaurentMatrix, z: &LaurentMatrix) -> Result<RationalVal, CartanError> {
    let circle = circle_of(b)?;
    let window = y.window().max(b.window());
    let bz = b.with_window(window).mul(&z.with_window(window).restrict(&circle)?)?;
    residual_between(&y.with_window(window).restrict(&circle)?, &bz)
}

/// Convenience constructor: `entry(i, j)` gives sparse `(exponent, coeff)` terms.
pub fn matrix_from_terms(
    ctx: PadicContext,
    n: usize,
    chart: Chart,
    window: u32,
    entry: impl Fn(usize, usize) -> Vec<(i64, PadicScalar)>,
) -> Result<LaurentMatrix, CartanError> {
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(LaurentSeries::from_terms(ctx, chart.clone(), window, entry(i, j))?);
        }
    }
    LaurentMatrix::from_entries(n, entries)
}
