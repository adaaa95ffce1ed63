//! Čech complexes of the structure sheaf on two-piece covers.
//!
//! Every cover handled here has monomial restriction maps: `T^i` on a piece
//! restricts to a multiple of `T^i` on the overlap (the Tate-curve gluing
//! `T -> qT` only rescales it). The two-term complex
//!
//! ```text
//!   C^0 = O(U_1) x O(U_2)  --d0-->  C^1 = O(U_12)
//! ```
//!
//! is therefore a direct sum over the exponent lattice, and `d0` is block
//! diagonal with one tiny block per exponent (or bi-exponent). Cohomology is
//! computed block by block, so the exponent window only decides *which* grades
//! are listed; no grade is ever cut in half. Ranks come from elementary
//! divisors with an explicit zero threshold.
//!
//! Supported spaces:
//! - `ProjLine`: `{|T| <= 1} ∪ {|T| >= 1}`, pieces carry exponents `>= 0` and
//!   `<= 0`, overlap the unit circle.
//! - `Annulus(a, s0, b)`: `{a <= v(T) <= s0} ∪ {s0 <= v(T) <= b}` glued along
//!   the circle `v(T) = s0`.
//! - `TateCurve(vq)`: the annuli `{0 <= v(T) <= vq/2}` and
//!   `{vq/2 <= v(T) <= vq}` glued along `v(T) = vq/2` and along
//!   `v(T) = vq ~ v(T) = 0` through `T -> qT`, with `q = p^vq`.
//! - `BidiscBoundary`: `{|x| = 1} ∪ {|y| = 1}` in the closed bidisc, graded by
//!   `(i, j)`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, PadicMatrix};
use crate::padic::{PadicContext, PadicScalar};
use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CechError {
    #[error("invalid space: {0}")]
    InvalidSpec(String),
    #[error("window must be at least 1")]
    ZeroWindow,
    #[error("threshold {threshold} exceeds the working precision {precision}")]
    ThresholdAbovePrecision { threshold: i64, precision: u32 },
    #[error("grade {grade}: {source}")]
    Precision { grade: Grade, source: LinalgError },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CechSpaceSpec {
    ProjLine,
    Annulus { a: RationalVal, s0: RationalVal, b: RationalVal },
    TateCurve { vq: RationalVal },
    BidiscBoundary,
}

impl CechSpaceSpec {
    pub fn validate(&self) -> Result<(), CechError> {
        match self {
            CechSpaceSpec::Annulus { a, s0, b } => {
                if a.is_infinite() || b.is_infinite() || !(a < s0 && s0 < b) {
                    return Err(CechError::InvalidSpec(format!(
                        "annulus needs finite a < s0 < b, got ({a}, {s0}, {b})"
                    )));
                }
            }
            CechSpaceSpec::TateCurve { vq } => {
                if !vq.is_positive() || vq.is_infinite() {
                    return Err(CechError::InvalidSpec(format!("v(q) must be positive, got {vq}")));
                }
                if !vq.is_integer() {
                    return Err(CechError::InvalidSpec(format!(
                        "v(q) = {vq} is not realized by an element of Q_p"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn name(&self) -> &'static str {
        match self {
            CechSpaceSpec::ProjLine => "p1",
            CechSpaceSpec::Annulus { .. } => "annulus",
            CechSpaceSpec::TateCurve { .. } => "tate",
            CechSpaceSpec::BidiscBoundary => "bidisc",
        }
    }
}

impl fmt::Display for CechSpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CechSpaceSpec::Annulus { a, s0, b } => write!(f, "annulus({a}, {s0}, {b})"),
            CechSpaceSpec::TateCurve { vq } => write!(f, "tate(v(q) = {vq})"),
            other => f.write_str(other.name()),
        }
    }
}

/// An exponent class: `i` for one-variable covers, `(i, j)` for the bidisc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grade {
    Single(i64),
    Pair(i64, i64),
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grade::Single(i) => write!(f, "{i}"),
            Grade::Pair(i, j) => write!(f, "({i},{j})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    First,
    Second,
    /// Component `k` of the overlap (the Tate curve has two circles).
    Overlap(u8),
}

/// A monomial basis vector of a Čech term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisElement {
    pub piece: Piece,
    pub grade: Grade,
}

/// The block of `d0` between the basis vectors of one grade.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradeBlock {
    pub grade: Grade,
    /// Indices into the degree-0 basis (columns).
    pub domain: Vec<usize>,
    /// Indices into the degree-1 basis (rows).
    pub codomain: Vec<usize>,
    pub matrix: PadicMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CechComplex {
    pub spec: CechSpaceSpec,
    pub window: u32,
    pub ctx: PadicContext,
    pub c0: Vec<BasisElement>,
    pub c1: Vec<BasisElement>,
    pub blocks: Vec<GradeBlock>,
}

/// Build the graded Čech complex of `spec` with exponents in `[-D, D]`.
pub fn build_cech(spec: &CechSpaceSpec, window: u32, ctx: PadicContext) -> Result<CechComplex, CechError> {
    spec.validate()?;
    if window == 0 {
        return Err(CechError::ZeroWindow);
    }
    let d = window as i64;
    let one = ctx.one();
    let minus_one = -one;
    let mut cx = CechComplex { spec: spec.clone(), window, ctx, c0: vec![], c1: vec![], blocks: vec![] };

    // (pieces present in degree 0 with their coefficient in each overlap row)
    let mut push = |grade: Grade, pieces: Vec<(Piece, Vec<PadicScalar>)>, overlaps: u8| {
        let domain: Vec<usize> = pieces
            .iter()
            .map(|(piece, _)| {
                cx.c0.push(BasisElement { piece: *piece, grade });
                cx.c0.len() - 1
            })
            .collect();
        let codomain: Vec<usize> = (0..overlaps)
            .map(|k| {
                cx.c1.push(BasisElement { piece: Piece::Overlap(k), grade });
                cx.c1.len() - 1
            })
            .collect();
        let mut m = PadicMatrix::zeros(ctx, overlaps as usize, pieces.len());
        for (col, (_, entries)) in pieces.iter().enumerate() {
            for (row, x) in entries.iter().enumerate() {
                m.set(row, col, *x);
            }
        }
        cx.blocks.push(GradeBlock { grade, domain, codomain, matrix: m });
    };

    match spec {
        CechSpaceSpec::ProjLine => {
            for i in -d..=d {
                let mut pieces = vec![];
                if i >= 0 {
                    pieces.push((Piece::First, vec![one]));
                }
                if i <= 0 {
                    pieces.push((Piece::Second, vec![minus_one]));
                }
                push(Grade::Single(i), pieces, 1);
            }
        }
        CechSpaceSpec::Annulus { .. } => {
            for i in -d..=d {
                push(Grade::Single(i), vec![(Piece::First, vec![one]), (Piece::Second, vec![minus_one])], 1);
            }
        }
        CechSpaceSpec::TateCurve { vq } => {
            let q = ctx.uniformizer_pow(vq.to_i64().expect("validated integral"));
            for i in -d..=d {
                let qi = q.pow(i).expect("q is nonzero");
                push(
                    Grade::Single(i),
                    vec![(Piece::First, vec![one, qi]), (Piece::Second, vec![minus_one, minus_one])],
                    2,
                );
            }
        }
        CechSpaceSpec::BidiscBoundary => {
            for i in -d..=d {
                for j in -d..=d {
                    let mut pieces = vec![];
                    if j >= 0 {
                        pieces.push((Piece::First, vec![one]));
                    }
                    if i >= 0 {
                        pieces.push((Piece::Second, vec![minus_one]));
                    }
                    push(Grade::Pair(i, j), pieces, 1);
                }
            }
        }
    }
    Ok(cx)
}

impl CechComplex {
    /// The full `d0` as one dense matrix (rows: `c1`, columns: `c0`).
    pub fn full_matrix(&self) -> PadicMatrix {
        let mut m = PadicMatrix::zeros(self.ctx, self.c1.len(), self.c0.len());
        for b in &self.blocks {
            for (r, &row) in b.codomain.iter().enumerate() {
                for (c, &col) in b.domain.iter().enumerate() {
                    m.set(row, col, b.matrix.get(r, c));
                }
            }
        }
        m
    }

    /// The cochain that is the constant `1` on both pieces.
    pub fn constant_cochain(&self) -> Vec<PadicScalar> {
        let zero_grade = match self.spec {
            CechSpaceSpec::BidiscBoundary => Grade::Pair(0, 0),
            _ => Grade::Single(0),
        };
        self.c0
            .iter()
            .map(|e| if e.grade == zero_grade { self.ctx.one() } else { self.ctx.zero() })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeReport {
    pub g: Grade,
    pub divisors: Vec<RationalVal>,
    pub h0: usize,
    pub h1: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub spec: CechSpaceSpec,
    #[serde(rename = "D")]
    pub window: u32,
    #[serde(rename = "N")]
    pub precision: u32,
    pub p: u64,
    pub threshold: i64,
    pub dims: [usize; 2],
    pub grades: Vec<GradeReport>,
    /// Which reported numbers are artifacts of the finite window.
    pub truncation_flags: Vec<String>,
}

/// Two guard digits below the working precision.
pub fn default_threshold(ctx: PadicContext) -> i64 {
    ctx.precision() as i64 - 2
}

/// Graded `H^0` and `H^1` of the complex.
///
/// Per grade, `h0` is the nullity and `h1` the corank of the block, with an
/// elementary divisor counting as zero iff its valuation is `>= threshold`.
/// Grades are evaluated in parallel; the report lists them in basis order.
pub fn cohomology(complex: &CechComplex, threshold: i64) -> Result<CohomologyReport, CechError> {
    let n = complex.ctx.precision();
    if threshold > n as i64 {
        return Err(CechError::ThresholdAbovePrecision { threshold, precision: n });
    }
    let grades: Vec<GradeReport> = complex
        .blocks
        .par_iter()
        .map(|b| {
            let divisors = b
                .matrix
                .elementary_divisors(threshold)
                .map_err(|source| CechError::Precision { grade: b.grade, source })?;
            let rank = divisors.len();
            Ok(GradeReport { g: b.grade, h0: b.domain.len() - rank, h1: b.codomain.len() - rank, divisors })
        })
        .collect::<Result<_, CechError>>()?;
    let dims = grades.iter().fold([0, 0], |acc, g| [acc[0] + g.h0, acc[1] + g.h1]);
    let truncation_flags = match complex.spec {
        CechSpaceSpec::ProjLine | CechSpaceSpec::TateCurve { .. } => vec![],
        CechSpaceSpec::Annulus { .. } => vec!["h0 counts window monomials".to_string()],
        CechSpaceSpec::BidiscBoundary => vec![
            "h0 counts window monomials".to_string(),
            "h1 is a truncated dimension".to_string(),
        ],
    };
    Ok(CohomologyReport {
        spec: complex.spec.clone(),
        window: complex.window,
        precision: n,
        p: complex.ctx.prime(),
        threshold,
        dims,
        grades,
        truncation_flags,
    })
}

/// Cohomology of an arbitrary two-term complex given by its `d0` matrix,
/// without using any grading: `(dim H^0, dim H^1, divisors)`.
pub fn cohomology_ungraded(
    d0: &PadicMatrix,
    threshold: i64,
) -> Result<(usize, usize, Vec<RationalVal>), LinalgError> {
    let divisors = d0.elementary_divisors(threshold)?;
    let rank = divisors.len();
    Ok((d0.cols() - rank, d0.rows() - rank, divisors))
}

/// One row of an acyclicity sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub spec: CechSpaceSpec,
    pub dims: [usize; 2],
}

/// Run [`cohomology`] over a family of annulus covers `(a, s0, b)`.
pub fn acyclicity_sweep(
    family: &[(RationalVal, RationalVal, RationalVal)],
    window: u32,
    ctx: PadicContext,
    threshold: i64,
) -> Result<Vec<CohomologyReport>, CechError> {
    family
        .iter()
        .map(|(a, s0, b)| {
            let spec = CechSpaceSpec::Annulus { a: a.clone(), s0: s0.clone(), b: b.clone() };
            cohomology(&build_cech(&spec, window, ctx)?, threshold)
        })
        .collect()
}

/// The reports of a sweep whose `H^1` is nonzero.
pub fn non_acyclic(reports: &[CohomologyReport]) -> Vec<SweepRow> {
    reports
        .iter()
        .filter(|r| r.dims[1] != 0)
        .map(|r| SweepRow { spec: r.spec.clone(), dims: r.dims })
        .collect()
}
