//! Formal models: blow-ups of the unit disc as join-closed vertex sets, their
//! dual trees and specialization, reductions of annuli, and the Tate curve.
//!
//! Dictionary for disc models: blowing up `(π, T - a)` on the component of a
//! vertex `η(c, r)` adds the vertex `η(c + a π^r, r + 1)`; an iterated blow-up
//! is the same thing as a finite join-closed set of type-2 points with
//! integral radii containing the Gauss point.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padic::{PadicContext, PadicError, PadicScalar};
use crate::points::{gm_retract, join, DiscPoint, PointError, Side};
use crate::series::{Chart, ChartKind, LaurentSeries};
use crate::val::RationalVal;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("model vertex {0} must be a type-2 point of the unit disc with integral radius")]
    BadVertex(String),
    #[error("model must contain the Gauss point η(0, 0)")]
    MissingRoot,
    #[error("model vertices {0} and {1} have join {2}, which is not a vertex")]
    NotJoinClosed(String, String, String),
    #[error("duplicate model vertex {0}")]
    Duplicate(String),
    #[error("point {0} is not in the closed unit disc")]
    OutsideDisc(String),
    #[error("chart bounds must be integral, got {0}")]
    NonIntegralChart(String),
    #[error("reduce_function needs a strict annulus with integral bounds, got {0}")]
    NotStrictAnnulus(String),
    #[error("function is not power-bounded on its chart")]
    NotIntegral,
    #[error("vq must be positive, got {0}")]
    BadVq(String),
    #[error("the Tate action needs an explicit q (vq = {0} is not an integer)")]
    MissingQ(String),
    #[error("skeleton coordinate {0} outside [0, {1})")]
    OutOfRange(String, String),
    #[error("a Tate dual graph needs at least one break point")]
    NoBreakPoints,
    #[error("break points must be distinct values in [0, vq)")]
    BadBreakPoints,
    #[error("j-expansion step budget of {0} exhausted")]
    Budget(u64),
    #[error("j-expansion needs at least one term")]
    NoTerms,
    #[error(transparent)]
    Point(#[from] PointError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

// ---------------------------------------------------------------- dual graphs

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    /// Affine line, the reduction of the closed unit disc.
    Line,
    ProjLine,
    Torus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphVertex {
    pub label: String,
    pub kind: ComponentKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualGraph {
    pub vertices: Vec<GraphVertex>,
    /// Unordered pairs of vertex indices; loops and repeats allowed.
    pub edges: Vec<(usize, usize)>,
    pub b1: i64,
}

impl DualGraph {
    pub fn new(vertices: Vec<GraphVertex>, edges: Vec<(usize, usize)>) -> Self {
        let b1 = edges.len() as i64 - vertices.len() as i64 + components(vertices.len(), &edges) as i64;
        DualGraph { vertices, edges, b1 }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph dual {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let shape = match v.kind {
                ComponentKind::Line => "box",
                ComponentKind::ProjLine => "ellipse",
                ComponentKind::Torus => "doublecircle",
            };
            out.push_str(&format!("  v{i} [label=\"{}\", shape={shape}];\n", v.label.replace('"', "\\\"")));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  v{a} -- v{b};\n"));
        }
        out.push_str("}\n");
        out
    }
}

fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    let mut count = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

// ---------------------------------------------------------------- disc models

/// Vertices of a formal model of the closed unit disc.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct DiscModelSpec {
    ctx: PadicContext,
    vertices: Vec<DiscPoint>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    context: PadicContext,
    vertices: Vec<DiscPoint>,
}

impl From<DiscModelSpec> for RawModel {
    fn from(m: DiscModelSpec) -> Self {
        RawModel { context: m.ctx, vertices: m.vertices }
    }
}

impl TryFrom<RawModel> for DiscModelSpec {
    type Error = ModelError;
    fn try_from(raw: RawModel) -> Result<Self, ModelError> {
        DiscModelSpec::new(raw.context, raw.vertices)
    }
}

fn radius_i64(x: &DiscPoint) -> i64 {
    x.radius().to_i64().expect("validated integral radius")
}

/// `outer` contains `inner` as a closed disc (rank-1 points only).
fn disc_contains(outer: &DiscPoint, inner: &DiscPoint) -> bool {
    let r = outer.radius();
    if inner.radius() < r {
        return false;
    }
    let d = *outer.center() - *inner.center();
    d.certified_val() >= r
}

impl DiscModelSpec {
    /// Validate a vertex list: type-2, integral radii `>= 0`, centers in the
    /// unit disc, the Gauss point present, no duplicates, closed under joins.
    /// The Gauss point is moved to the front.
    pub fn new(ctx: PadicContext, vertices: Vec<DiscPoint>) -> Result<Self, ModelError> {
        let gauss = DiscPoint::gauss(ctx);
        for v in &vertices {
            let ok = matches!(v, DiscPoint::Type2 { .. })
                && v.radius().is_integer()
                && !v.radius().is_negative()
                && v.center().certified_val() >= RationalVal::zero();
            if !ok {
                return Err(ModelError::BadVertex(v.to_string()));
            }
        }
        for (i, a) in vertices.iter().enumerate() {
            if vertices[..i].iter().any(|b| b.is_equiv(a)) {
                return Err(ModelError::Duplicate(a.to_string()));
            }
        }
        let Some(root) = vertices.iter().position(|v| v.is_equiv(&gauss)) else {
            return Err(ModelError::MissingRoot);
        };
        for a in &vertices {
            for b in &vertices {
                let j = join(a, b)?;
                if !vertices.iter().any(|v| v.is_equiv(&j)) {
                    return Err(ModelError::NotJoinClosed(a.to_string(), b.to_string(), j.to_string()));
                }
            }
        }
        let mut vertices = vertices;
        vertices.swap(0, root);
        Ok(DiscModelSpec { ctx, vertices })
    }

    /// The model `Spf K°<T>`, with the single vertex `η(0, 0)`.
    pub fn trivial(ctx: PadicContext) -> Self {
        DiscModelSpec { ctx, vertices: vec![DiscPoint::gauss(ctx)] }
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn vertices(&self) -> &[DiscPoint] {
        &self.vertices
    }

    pub fn index_of(&self, x: &DiscPoint) -> Option<usize> {
        self.vertices.iter().position(|v| v.is_equiv(x))
    }

    /// Add a vertex together with its joins against the existing vertices,
    /// which keeps the set join-closed.
    pub fn with_vertex(&self, x: DiscPoint) -> Result<Self, ModelError> {
        let mut vertices = self.vertices.clone();
        let mut new = vec![x.clone()];
        for v in &self.vertices {
            new.push(join(&x, v)?);
        }
        for n in new {
            if !vertices.iter().any(|v| v.is_equiv(&n)) {
                vertices.push(n);
            }
        }
        DiscModelSpec::new(self.ctx, vertices)
    }

    /// Blow up the closed point with residue `a` on the component of vertex
    /// `u`: adds `η(c_u + a π^{r_u}, r_u + 1)`.
    pub fn blow_up(&self, u: usize, a: u64) -> Result<Self, ModelError> {
        let vu = &self.vertices[u];
        let r = radius_i64(vu);
        let c = *vu.center() + self.ctx.from_int(a as i64).shift(r);
        self.with_vertex(DiscPoint::type2(c, RationalVal::from_int(r + 1))?)
    }

    /// Index of the tightest vertex strictly containing vertex `i`.
    pub fn parent(&self, i: usize) -> Option<usize> {
        let x = &self.vertices[i];
        self.vertices
            .iter()
            .enumerate()
            .filter(|(j, v)| *j != i && disc_contains(v, x))
            .max_by_key(|(_, v)| radius_i64(v))
            .map(|(j, _)| j)
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&j| self.parent(j) == Some(i)).collect()
    }
}

pub fn disc_model_dual_tree(spec: &DiscModelSpec) -> DualGraph {
    let vertices = spec
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| GraphVertex {
            label: v.to_string(),
            kind: if i == 0 { ComponentKind::Line } else { ComponentKind::ProjLine },
        })
        .collect();
    let edges = (1..spec.vertices.len()).map(|i| (spec.parent(i).expect("root contains all"), i)).collect();
    DualGraph::new(vertices, edges)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueLabel {
    /// The residue class `a ∈ F_p` of an inward direction.
    Residue(u64),
    /// The outward branch; never produced for points of the unit disc.
    InfinityDirection,
}

impl fmt::Display for ResidueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResidueLabel::Residue(a) => write!(f, "{a}"),
            ResidueLabel::InfinityDirection => f.write_str("∞-direction"),
        }
    }
}

/// Image of the specialization map, by vertex index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecializationTarget {
    GenericOf { vertex: usize },
    ClosedPointOf { vertex: usize, residue: ResidueLabel },
    /// `parent` is the outer vertex.
    NodeBetween { parent: usize, child: usize },
}

impl SpecializationTarget {
    pub fn vertices(&self) -> Vec<usize> {
        match self {
            SpecializationTarget::GenericOf { vertex } | SpecializationTarget::ClosedPointOf { vertex, .. } => {
                vec![*vertex]
            }
            SpecializationTarget::NodeBetween { parent, child } => vec![*parent, *child],
        }
    }

    pub fn describe(&self, spec: &DiscModelSpec) -> String {
        let name = |i: &usize| spec.vertices[*i].to_string();
        match self {
            SpecializationTarget::GenericOf { vertex } => format!("generic point of {}", name(vertex)),
            SpecializationTarget::ClosedPointOf { vertex, residue } => {
                format!("closed point {residue} of {}", name(vertex))
            }
            SpecializationTarget::NodeBetween { parent, child } => {
                format!("node between {} and {}", name(parent), name(child))
            }
        }
    }
}

/// Whether vertex `u` contains `x`, with type-5 points at radius `r ± δ`.
fn vertex_contains(u: &DiscPoint, x: &DiscPoint) -> bool {
    let ru = u.radius();
    let radius_ok = match x {
        DiscPoint::Type5 { r, side: Side::Minus, .. } => *r > ru,
        _ => x.radius() >= ru,
    };
    radius_ok && (*u.center() - *x.center()).certified_val() >= ru
}

/// `sp(x)`: the smallest vertex `u` containing `x`; then the generic point if
/// `x = u`, the node toward a child `w` if `x` lies in the residue class of
/// `w` (the open annulus between `u` and `w`), and otherwise the closed point
/// of `u` named by the residue of `x`.
pub fn specialize(spec: &DiscModelSpec, x: &DiscPoint) -> Result<SpecializationTarget, ModelError> {
    if !x.in_unit_disc() {
        return Err(ModelError::OutsideDisc(x.to_string()));
    }
    let u = spec
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| vertex_contains(v, x))
        .max_by_key(|(_, v)| radius_i64(v))
        .map(|(i, _)| i)
        .expect("the Gauss point contains the unit disc");
    let vu = &spec.vertices[u];
    if vu.is_equiv(x) {
        return Ok(SpecializationTarget::GenericOf { vertex: u });
    }
    let ru = vu.radius();
    for w in spec.children(u) {
        let cw = *spec.vertices[w].center();
        if (cw - *x.center()).certified_val() > ru {
            return Ok(SpecializationTarget::NodeBetween { parent: u, child: w });
        }
    }
    let shifted = (*x.center() - *vu.center()).shift(-radius_i64(vu));
    Ok(SpecializationTarget::ClosedPointOf { vertex: u, residue: ResidueLabel::Residue(shifted.residue()?) })
}

/// A point with the given specialization target.
pub fn representative(spec: &DiscModelSpec, t: &SpecializationTarget) -> Result<DiscPoint, ModelError> {
    let ctx = spec.ctx;
    Ok(match t {
        SpecializationTarget::GenericOf { vertex } => spec.vertices[*vertex].clone(),
        SpecializationTarget::ClosedPointOf { vertex, residue } => {
            let v = &spec.vertices[*vertex];
            let a = match residue {
                ResidueLabel::Residue(a) => *a as i64,
                ResidueLabel::InfinityDirection => 0,
            };
            DiscPoint::type1(*v.center() + ctx.from_int(a).shift(radius_i64(v)))
        }
        SpecializationTarget::NodeBetween { parent, child } => {
            let (p, c) = (&spec.vertices[*parent], &spec.vertices[*child]);
            let mid = &(&p.radius() + &c.radius()) * &num_rational::BigRational::new(1.into(), 2.into());
            DiscPoint::type2(*c.center(), mid)?
        }
    })
}

// ------------------------------------------------------------------ annuli

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionKind {
    /// `Spec k[s, t]/(st)`.
    Nodal,
    /// `Spec k[s, 1/s]`.
    Torus,
    Line,
}

fn integral_bound(v: &RationalVal) -> bool {
    v.is_infinite() || v.is_integer()
}

pub fn reduce_annulus(chart: &Chart) -> Result<ReductionKind, ModelError> {
    let outer_ok = chart.outer().is_none_or(|a| a.is_integer());
    if !outer_ok || !integral_bound(chart.inner()) {
        return Err(ModelError::NonIntegralChart(chart.to_string()));
    }
    Ok(match chart.kind() {
        ChartKind::Annulus => ReductionKind::Nodal,
        ChartKind::Circle => ReductionKind::Torus,
        ChartKind::Disc | ChartKind::InverseDisc => ReductionKind::Line,
    })
}

/// Reduction of a power-bounded function on an annulus `a <= v(T) <= b` in
/// `k[s, t]/(st)`, where `T = π^a s` and `T^-1 = π^-b t`. Polynomials are
/// listed by degree and share the constant term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedFunction {
    pub s_poly: Vec<u64>,
    pub t_poly: Vec<u64>,
}

impl ReducedFunction {
    pub fn constant(&self) -> u64 {
        self.s_poly.first().copied().unwrap_or(0)
    }

    /// Product in `k[s, t]/(st)`: the parts multiply separately.
    pub fn mul(&self, other: &ReducedFunction, p: u64) -> ReducedFunction {
        ReducedFunction {
            s_poly: poly_mul_mod(&self.s_poly, &other.s_poly, p),
            t_poly: poly_mul_mod(&self.t_poly, &other.t_poly, p),
        }
    }
}

fn trim(mut v: Vec<u64>) -> Vec<u64> {
    while v.len() > 1 && *v.last().expect("nonempty") == 0 {
        v.pop();
    }
    if v.is_empty() {
        v.push(0);
    }
    v
}

fn poly_mul_mod(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len()];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y % p) % p;
        }
    }
    trim(out)
}

fn render_poly(coeffs: &[u64], var: &str) -> String {
    let parts: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(i, c)| match (i, c) {
            (0, c) => c.to_string(),
            (1, 1) => var.to_string(),
            (1, c) => format!("{c}{var}"),
            (i, 1) => format!("{var}^{i}"),
            (i, c) => format!("{c}{var}^{i}"),
        })
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

impl fmt::Display for ReducedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", render_poly(&self.s_poly, "s"), render_poly(&self.t_poly, "t"))
    }
}

pub fn reduce_function(f: &LaurentSeries) -> Result<ReducedFunction, ModelError> {
    let chart = f.chart();
    let (Some(a), ChartKind::Annulus) = (chart.outer(), chart.kind()) else {
        return Err(ModelError::NotStrictAnnulus(chart.to_string()));
    };
    let (Some(a), Some(b)) = (a.to_i64(), chart.inner().to_i64()) else {
        return Err(ModelError::NotStrictAnnulus(chart.to_string()));
    };
    if !f.is_power_bounded() {
        return Err(ModelError::NotIntegral);
    }
    let d = f.window() as usize;
    let mut s = vec![0u64; d + 1];
    let mut t = vec![0u64; d + 1];
    for (i, c) in f.terms() {
        if i >= 0 {
            s[i as usize] = c.shift(i * a).residue()?;
        }
        if i <= 0 {
            t[(-i) as usize] = c.shift(i * b).residue()?;
        }
    }
    Ok(ReducedFunction { s_poly: trim(s), t_poly: trim(t) })
}

// --------------------------------------------------------------- Tate curve

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TateParams {
    pub vq: RationalVal,
    pub q: Option<PadicScalar>,
}

impl TateParams {
    /// Only `vq`; the action is unavailable unless `vq` is an integer, in
    /// which case [`TateParams::standard`] supplies `q = p^vq`.
    pub fn new(vq: RationalVal) -> Result<Self, ModelError> {
        if !vq.is_positive() || vq.is_infinite() {
            return Err(ModelError::BadVq(vq.to_string()));
        }
        Ok(TateParams { vq, q: None })
    }

    pub fn with_q(q: PadicScalar) -> Result<Self, ModelError> {
        let vq = q.val();
        let mut t = TateParams::new(vq)?;
        t.q = Some(q);
        Ok(t)
    }

    /// `q = p^vq`, or no `q` for fractional `vq`.
    pub fn standard(ctx: PadicContext, vq: RationalVal) -> Result<Self, ModelError> {
        let mut t = TateParams::new(vq)?;
        t.q = t.vq.to_i64().map(|k| ctx.uniformizer_pow(k));
        Ok(t)
    }

    fn q(&self) -> Result<PadicScalar, ModelError> {
        self.q.ok_or_else(|| ModelError::MissingQ(self.vq.to_string()))
    }

    fn vq_rational(&self) -> &num_rational::BigRational {
        self.vq.finite().expect("validated finite")
    }
}

/// `T -> q^m T`.
pub fn tate_action(x: &DiscPoint, m: i64, params: &TateParams) -> Result<DiscPoint, ModelError> {
    if m == 0 {
        return Ok(x.clone());
    }
    let qm = params.q()?.pow(m)?;
    let shift = params.vq.mul_int(m);
    Ok(match x {
        DiscPoint::Type1 { c } => DiscPoint::type1(*c * qm),
        DiscPoint::Type2 { c, r } => DiscPoint::type2(*c * qm, r + &shift)?,
        DiscPoint::Type5 { c, r, side } => DiscPoint::type5(*c * qm, r + &shift, *side)?,
    })
}

/// Orbit representative with `gm_retract` in `[0, vq)` and the sheet index.
pub fn tate_orbit_normalize(x: &DiscPoint, params: &TateParams) -> Result<(DiscPoint, i64), ModelError> {
    let s = gm_retract(x)?;
    let (sheet, _) = s.div_rem_floor(params.vq_rational()).expect("finite retraction");
    let sheet: i64 = sheet.try_into().map_err(|_| ModelError::OutOfRange(s.to_string(), params.vq.to_string()))?;
    Ok((tate_action(x, -sheet, params)?, sheet))
}

/// `U_n = {(n+1) vq/2 >= v(T) >= n vq/2}` against its translate by `q^m`.
pub fn tate_cover_disjoint(n: i64, m: i64, params: &TateParams) -> bool {
    let half = &params.vq * &num_rational::BigRational::new(1.into(), 2.into());
    let lo = half.mul_int(n);
    let hi = half.mul_int(n + 1);
    let shift = params.vq.mul_int(m);
    let (lo2, hi2) = (&lo + &shift, &hi + &shift);
    lo.max(lo2) > hi.min(hi2)
}

pub fn tate_retract(x: &DiscPoint, params: &TateParams) -> Result<RationalVal, ModelError> {
    let s = gm_retract(x)?;
    Ok(s.div_rem_floor(params.vq_rational()).expect("finite").1)
}

pub fn universal_cover_lift(s: &RationalVal, sheet: i64, params: &TateParams) -> Result<RationalVal, ModelError> {
    if s.is_negative() || *s >= params.vq {
        return Err(ModelError::OutOfRange(s.to_string(), params.vq.to_string()));
    }
    Ok(s + &params.vq.mul_int(sheet))
}

/// The model whose special fibre is a cycle of `k` projective lines, one per
/// arc between consecutive break points on the skeleton circle.
pub fn tate_dual_graph(breaks: &[RationalVal], params: &TateParams) -> Result<DualGraph, ModelError> {
    if breaks.is_empty() {
        return Err(ModelError::NoBreakPoints);
    }
    let set: BTreeSet<&RationalVal> = breaks.iter().collect();
    if set.len() != breaks.len() || breaks.iter().any(|b| b.is_negative() || *b >= params.vq) {
        return Err(ModelError::BadBreakPoints);
    }
    let sorted: Vec<&RationalVal> = set.into_iter().collect();
    let k = sorted.len();
    let vertices = (0..k)
        .map(|i| {
            let end = if i + 1 < k { sorted[i + 1].clone() } else { sorted[0] + &params.vq };
            GraphVertex { label: format!("[{}, {}]", sorted[i], end), kind: ComponentKind::ProjLine }
        })
        .collect();
    // the break point sorted[i] joins the arc ending there to the one starting there
    let edges = (0..k).map(|i| ((i + k - 1) % k, i)).collect();
    Ok(DualGraph::new(vertices, edges))
}

pub fn j_valuation(params: &TateParams) -> RationalVal {
    -&params.vq
}

/// Integer power series truncated to a fixed length.
struct Budget {
    left: u64,
    total: u64,
}

impl Budget {
    fn spend(&mut self, n: u64) -> Result<(), ModelError> {
        if n > self.left {
            return Err(ModelError::Budget(self.total));
        }
        self.left -= n;
        Ok(())
    }
}

fn series_mul(a: &[BigInt], b: &[BigInt], len: usize, budget: &mut Budget) -> Result<Vec<BigInt>, ModelError> {
    let mut out = vec![BigInt::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        budget.spend((len - i) as u64)?;
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    Ok(out)
}

/// `a / b` for integer series where the quotient is known to be integral.
fn series_div(a: &[BigInt], b: &[BigInt], len: usize, budget: &mut Budget) -> Result<Vec<BigInt>, ModelError> {
    let mut out = vec![BigInt::zero(); len];
    for n in 0..len {
        budget.spend(n as u64 + 1)?;
        let mut acc = a.get(n).cloned().unwrap_or_default();
        for k in 0..n {
            if let Some(bk) = b.get(n - k) {
                acc -= &out[k] * bk;
            }
        }
        let (qt, rem) = acc.div_rem(&b[0]);
        debug_assert!(rem.is_zero(), "non-integral quotient");
        out[n] = qt;
    }
    Ok(out)
}

fn sigma(n: u64, k: u32) -> BigInt {
    (1..=n).filter(|d| n.is_multiple_of(*d)).map(|d| BigInt::from(d).pow(k)).sum()
}

fn eisenstein(len: usize, k: u32, scale: i64) -> Vec<BigInt> {
    let mut e = vec![BigInt::zero(); len];
    e[0] = BigInt::one();
    for (n, slot) in e.iter_mut().enumerate().skip(1) {
        *slot = sigma(n as u64, k) * scale;
    }
    e
}

/// Default step budget for [`j_expansion`]; ample for a few hundred terms.
pub const DEFAULT_J_BUDGET: u64 = 50_000_000;

/// Coefficients of `q^-1, q^0, q^1, ...` of `j = E4^3 / Δ` with
/// `Δ = q Π (1 - q^n)^24`.
pub fn j_expansion(terms: usize, budget: u64) -> Result<Vec<BigInt>, ModelError> {
    if terms == 0 {
        return Err(ModelError::NoTerms);
    }
    let len = terms;
    let mut b = Budget { left: budget, total: budget };
    let e4 = eisenstein(len, 3, 240);
    let e4_cubed = series_mul(&series_mul(&e4, &e4, len, &mut b)?, &e4, len, &mut b)?;
    // Π (1 - q^n)^24 up to q^(len-1)
    let mut prod = vec![BigInt::zero(); len];
    prod[0] = BigInt::one();
    for n in 1..len {
        for _ in 0..24 {
            b.spend(len as u64)?;
            for i in (n..len).rev() {
                let sub = prod[i - n].clone();
                prod[i] -= sub;
            }
        }
    }
    series_div(&e4_cubed, &prod, len, &mut b)
}

/// The same coefficients from `1728 E4^3 / (E4^3 - E6^2)`, with no product
/// formula involved.
pub fn j_expansion_via_e6(terms: usize, budget: u64) -> Result<Vec<BigInt>, ModelError> {
    if terms == 0 {
        return Err(ModelError::NoTerms);
    }
    let len = terms + 1;
    let mut b = Budget { left: budget, total: budget };
    let e4 = eisenstein(len, 3, 240);
    let e6 = eisenstein(len, 5, -504);
    let e4_cubed = series_mul(&series_mul(&e4, &e4, len, &mut b)?, &e4, len, &mut b)?;
    let e6_sq = series_mul(&e6, &e6, len, &mut b)?;
    // E4^3 - E6^2 = 1728 q + ...; drop the factor q
    let disc: Vec<BigInt> = (1..len).map(|i| &e4_cubed[i] - &e6_sq[i]).collect();
    let num: Vec<BigInt> = e4_cubed.iter().take(terms).map(|x| x * 1728).collect();
    series_div(&num, &disc, terms, &mut b)
}

pub fn j_expansion_text(coeffs: &[BigInt]) -> String {
    let mut parts = Vec::new();
    for (k, c) in coeffs.iter().enumerate() {
        let e = k as i64 - 1;
        let mono = match e {
            -1 => "q^-1".to_string(),
            0 => String::new(),
            1 => "q".to_string(),
            e => format!("q^{e}"),
        };
        parts.push(match (mono.is_empty(), c.is_one()) {
            (true, _) => c.to_string(),
            (false, true) => mono,
            (false, false) => format!("{c}*{mono}"),
        });
    }
    parts.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::parse_point;

    fn ctx() -> PadicContext {
        PadicContext::new(5, 8).unwrap()
    }

    fn pt(s: &str) -> DiscPoint {
        parse_point(&ctx(), s).unwrap()
    }

    fn v(n: i64) -> RationalVal {
        RationalVal::from_int(n)
    }

    fn model(vs: &[&str]) -> DiscModelSpec {
        DiscModelSpec::new(ctx(), vs.iter().map(|s| pt(s)).collect()).unwrap()
    }

    #[test]
    fn dual_tree_examples() {
        let g = disc_model_dual_tree(&model(&["η(0, 0)"]));
        assert_eq!((g.vertices.len(), g.edges.len(), g.b1), (1, 0, 0));
        assert_eq!(g.vertices[0].kind, ComponentKind::Line);
        let g = disc_model_dual_tree(&model(&["η(0, 0)", "η(0, 1)"]));
        assert_eq!((g.vertices.len(), g.edges.len(), g.b1), (2, 1, 0));
        assert_eq!(g.vertices[1].kind, ComponentKind::ProjLine);
        let g = disc_model_dual_tree(&model(&["η(0, 0)", "η(0, 1)", "η(1, 1)"]));
        assert_eq!(g.edges, vec![(0, 1), (0, 2)]);
        assert_eq!(g.b1, 0);
        assert!(g.to_dot().contains("v0 -- v2;"));
    }

    #[test]
    fn model_validation() {
        let c = ctx();
        let bad = |vs: &[&str]| DiscModelSpec::new(c, vs.iter().map(|s| pt(s)).collect()).unwrap_err();
        assert_eq!(bad(&["η(0, 1)"]), ModelError::MissingRoot);
        assert!(matches!(bad(&["η(0, 0)", "η(0, 1/2)"]), ModelError::BadVertex(_)));
        assert!(matches!(bad(&["η(0, 0)", "x(1)"]), ModelError::BadVertex(_)));
        assert!(matches!(bad(&["η(0, 0)", "η(0, 0)"]), ModelError::Duplicate(_)));
        // η(0, 2) and η(5, 2) join at η(0, 1)
        assert!(matches!(bad(&["η(0, 0)", "η(0, 2)", "η(5, 2)"]), ModelError::NotJoinClosed(..)));
        let m = model(&["η(0, 0)", "η(0, 2)"]).with_vertex(pt("η(5, 2)")).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert!(m.index_of(&pt("η(0, 1)")).is_some());
        let b = DiscModelSpec::trivial(c).blow_up(0, 3).unwrap();
        assert!(b.index_of(&pt("η(3, 1)")).is_some());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<DiscModelSpec>(&json).unwrap(), m);
    }

    #[test]
    fn specialize_examples() {
        let m = model(&["η(0, 0)"]);
        assert_eq!(specialize(&m, &pt("η(0, 0)")).unwrap(), SpecializationTarget::GenericOf { vertex: 0 });
        assert_eq!(
            specialize(&m, &pt("x(7)")).unwrap(),
            SpecializationTarget::ClosedPointOf { vertex: 0, residue: ResidueLabel::Residue(2) }
        );
        let m = model(&["η(0, 0)", "η(0, 1)"]);
        assert_eq!(
            specialize(&m, &pt("η(0, 1/2)")).unwrap(),
            SpecializationTarget::NodeBetween { parent: 0, child: 1 }
        );
        assert_eq!(specialize(&m, &pt("η(0, 1)-")).unwrap(), SpecializationTarget::NodeBetween { parent: 0, child: 1 });
        assert_eq!(specialize(&m, &pt("η(0, 1)+")).unwrap(), SpecializationTarget::ClosedPointOf { vertex: 1, residue: ResidueLabel::Residue(0) });
        assert_eq!(specialize(&m, &pt("x(10)")).unwrap(), SpecializationTarget::ClosedPointOf { vertex: 1, residue: ResidueLabel::Residue(2) });
        assert!(matches!(specialize(&m, &pt("η(0, 0)-")), Err(ModelError::OutsideDisc(_))));
        assert!(matches!(specialize(&m, &pt("x(1/5)")), Err(ModelError::OutsideDisc(_))));
    }

    #[test]
    fn annulus_reductions() {
        assert_eq!(reduce_annulus(&Chart::annulus(v(0), v(1)).unwrap()).unwrap(), ReductionKind::Nodal);
        assert_eq!(reduce_annulus(&Chart::circle(v(1)).unwrap()).unwrap(), ReductionKind::Torus);
        assert_eq!(reduce_annulus(&Chart::unit_disc()).unwrap(), ReductionKind::Line);
        assert!(reduce_annulus(&Chart::circle(RationalVal::ratio(1, 2)).unwrap()).is_err());

        let ann = Chart::annulus(v(0), v(1)).unwrap();
        let f = LaurentSeries::from_ints(ctx(), ann.clone(), 4, &[(0, 3), (1, 1), (-1, 5)]).unwrap();
        let r = reduce_function(&f).unwrap();
        assert_eq!((r.s_poly.clone(), r.t_poly.clone()), (vec![3, 1], vec![3, 1]));
        assert_eq!(r.to_string(), "(3 + s, 3 + t)");
        let one = reduce_function(&LaurentSeries::from_ints(ctx(), ann.clone(), 4, &[(0, 1)]).unwrap()).unwrap();
        assert_eq!((one.s_poly, one.t_poly), (vec![1], vec![1]));
        let five = reduce_function(&LaurentSeries::from_ints(ctx(), ann.clone(), 4, &[(0, 5)]).unwrap()).unwrap();
        assert_eq!((five.s_poly, five.t_poly), (vec![0], vec![0]));
        let unbounded = LaurentSeries::from_ints(ctx(), ann, 4, &[(-1, 1)]).unwrap();
        assert_eq!(reduce_function(&unbounded), Err(ModelError::NotIntegral));
    }

    #[test]
    fn tate_action_examples() {
        let c = ctx();
        let t = TateParams::standard(c, v(3)).unwrap();
        assert_eq!(tate_action(&pt("η(0, 1)"), 0, &t).unwrap(), pt("η(0, 1)"));
        assert!(tate_action(&pt("η(0, 1)"), 1, &t).unwrap().is_equiv(&pt("η(0, 4)")));
        let t125 = TateParams::with_q(c.from_int(125)).unwrap();
        assert!(tate_action(&pt("x(5)"), -1, &t125).unwrap().is_equiv(&pt("x(1/25)")));
        let frac = TateParams::standard(c, RationalVal::ratio(3, 2)).unwrap();
        assert!(matches!(tate_action(&pt("x(5)"), 1, &frac), Err(ModelError::MissingQ(_))));
        assert!(TateParams::new(v(0)).is_err());
    }

    #[test]
    fn tate_normalize_and_retract() {
        let c = ctx();
        let t = TateParams::standard(c, v(3)).unwrap();
        let x = DiscPoint::type1(c.from_parts(7, 2));
        let (rep, sheet) = tate_orbit_normalize(&x, &t).unwrap();
        assert_eq!(sheet, 2);
        assert_eq!(gm_retract(&rep).unwrap(), v(1));
        let (rep, sheet) = tate_orbit_normalize(&pt("x(3)"), &t).unwrap();
        assert_eq!((rep, sheet), (pt("x(3)"), 0));
        let (rep, sheet) = tate_orbit_normalize(&pt("x(1/5)"), &t).unwrap();
        assert_eq!(sheet, -1);
        assert_eq!(gm_retract(&rep).unwrap(), v(2));

        assert_eq!(tate_retract(&x, &t).unwrap(), v(1));
        assert_eq!(tate_retract(&pt("η(0, 3)"), &t).unwrap(), v(0));
        let t1 = TateParams::standard(c, v(1)).unwrap();
        assert_eq!(tate_retract(&pt("η(0, 7/3)"), &t1).unwrap(), RationalVal::ratio(1, 3));
    }

    #[test]
    fn cover_and_lift() {
        let t = TateParams::new(v(3)).unwrap();
        assert!(tate_cover_disjoint(0, 1, &t));
        assert!(!tate_cover_disjoint(0, 0, &t));
        assert!(tate_cover_disjoint(5, -2, &t));
        assert_eq!(universal_cover_lift(&v(1), 0, &t).unwrap(), v(1));
        assert_eq!(universal_cover_lift(&v(1), 2, &t).unwrap(), v(7));
        assert!(universal_cover_lift(&v(3), 0, &t).is_err());
    }

    #[test]
    fn tate_dual_graphs() {
        let t = TateParams::new(v(3)).unwrap();
        let g = tate_dual_graph(&[v(0), RationalVal::ratio(3, 2)], &t).unwrap();
        assert_eq!((g.vertices.len(), g.edges.len(), g.b1), (2, 2, 1));
        let g = tate_dual_graph(&[v(0), v(1), v(2)], &t).unwrap();
        assert_eq!((g.vertices.len(), g.edges.len(), g.b1), (3, 3, 1));
        let g = tate_dual_graph(&[v(0)], &t).unwrap();
        assert_eq!(g.edges, vec![(0, 0)]);
        assert_eq!(g.b1, 1);
        assert_eq!(tate_dual_graph(&[], &t), Err(ModelError::NoBreakPoints));
        assert_eq!(tate_dual_graph(&[v(3)], &t), Err(ModelError::BadBreakPoints));
        assert_eq!(tate_dual_graph(&[v(1), v(1)], &t), Err(ModelError::BadBreakPoints));
    }

    #[test]
    fn j_invariant() {
        let j = j_expansion(4, DEFAULT_J_BUDGET).unwrap();
        let ints: Vec<BigInt> = [1i64, 744, 196884, 21493760].iter().map(|&x| BigInt::from(x)).collect();
        assert_eq!(j, ints);
        assert_eq!(j_expansion_via_e6(12, DEFAULT_J_BUDGET).unwrap(), j_expansion(12, DEFAULT_J_BUDGET).unwrap());
        assert_eq!(j_valuation(&TateParams::new(v(3)).unwrap()), v(-3));
        assert_eq!(j_expansion(200, 1000), Err(ModelError::Budget(1000)));
        assert_eq!(j_expansion_text(&j[..3]), "q^-1 + 744 + 196884*q");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vertex() -> impl Strategy<Value = DiscPoint> {
            (0i64..125, 1i64..4).prop_map(|(c, r)| DiscPoint::type2(ctx().from_int(c), v(r)).unwrap())
        }

        fn disc_point() -> impl Strategy<Value = DiscPoint> {
            prop_oneof![
                (0i64..625).prop_map(|c| DiscPoint::type1(ctx().from_int(c))),
                (0i64..625, 0i64..9).prop_map(|(c, r)| DiscPoint::type2(ctx().from_int(c), RationalVal::ratio(r, 2)).unwrap()),
                (0i64..625, 0i64..5, any::<bool>()).prop_map(|(c, r, plus)| {
                    let side = if plus { Side::Plus } else { Side::Minus };
                    DiscPoint::type5(ctx().from_int(c), v(r), side).unwrap()
                }),
            ]
        }

        fn random_model() -> impl Strategy<Value = DiscModelSpec> {
            proptest::collection::vec(vertex(), 0..5).prop_map(|vs| {
                vs.into_iter().fold(DiscModelSpec::trivial(ctx()), |m, x| m.with_vertex(x).unwrap())
            })
        }

        fn adjacent_or_same(m: &DiscModelSpec, a: &SpecializationTarget, b: &SpecializationTarget) -> bool {
            let (va, vb) = (a.vertices(), b.vertices());
            va.iter().any(|x| vb.contains(x))
                || va.iter().any(|&x| vb.iter().any(|&y| m.parent(x) == Some(y) || m.parent(y) == Some(x)))
        }

        proptest! {
            #[test]
            fn dual_tree_is_a_tree(m in random_model()) {
                let g = disc_model_dual_tree(&m);
                prop_assert_eq!(g.b1, 0);
                prop_assert_eq!(g.edges.len() + 1, g.vertices.len());
            }

            #[test]
            fn specialization_compatible(m in random_model(), x in disc_point()) {
                prop_assume!(x.in_unit_disc());
                let g = x.max_generalization();
                let (tx, tg) = (specialize(&m, &x).unwrap(), specialize(&m, &g).unwrap());
                prop_assert!(adjacent_or_same(&m, &tx, &tg), "{:?} vs {:?}", tx, tg);
                if let SpecializationTarget::NodeBetween { parent, child } = tx {
                    prop_assert_eq!(m.parent(child), Some(parent));
                }
            }

            #[test]
            fn refinement(m in random_model(), new in vertex(), x in disc_point()) {
                prop_assume!(x.in_unit_disc());
                let fine = m.with_vertex(new.clone()).unwrap();
                let coarse_x = specialize(&m, &x).unwrap();
                let fine_x = specialize(&fine, &x).unwrap();
                // tube constancy: the fine target lies over the coarse one
                let rep = representative(&fine, &fine_x).unwrap();
                prop_assert_eq!(specialize(&m, &rep).unwrap(), coarse_x.clone());
                // points away from the new vertex's coarse tube keep their target
                if coarse_x != specialize(&m, &new).unwrap() {
                    let name = |t: &SpecializationTarget, s: &DiscModelSpec| t.describe(s);
                    prop_assert_eq!(name(&fine_x, &fine), name(&coarse_x, &m));
                }
            }

            #[test]
            fn tate_group_action(c in 1i64..10_000, r in -6i64..6, m1 in -3i64..3, m2 in -3i64..3) {
                let t = TateParams::standard(ctx(), v(2)).unwrap();
                for x in [DiscPoint::type1(ctx().from_int(c)), DiscPoint::type2(ctx().from_int(c), v(r)).unwrap()] {
                    let a = tate_action(&tate_action(&x, m1, &t).unwrap(), m2, &t).unwrap();
                    let b = tate_action(&x, m1 + m2, &t).unwrap();
                    prop_assert!(a.is_equiv(&b));
                    prop_assert_eq!(tate_retract(&b, &t).unwrap(), tate_retract(&x, &t).unwrap());
                    prop_assert_eq!(gm_retract(&b).unwrap(), &gm_retract(&x).unwrap() + &v(2 * (m1 + m2)));
                    let (rep, sheet) = tate_orbit_normalize(&x, &t).unwrap();
                    let s = gm_retract(&rep).unwrap();
                    prop_assert!(!s.is_negative() && s < v(2));
                    prop_assert_eq!(universal_cover_lift(&s, sheet, &t).unwrap(), gm_retract(&x).unwrap());
                }
            }

            #[test]
            fn reduction_is_multiplicative(
                f in proptest::collection::vec((-2i64..=2, 0i64..40), 1..4),
                g in proptest::collection::vec((-2i64..=2, 0i64..40), 1..4),
            ) {
                let ann = Chart::annulus(v(0), v(1)).unwrap();
                // scale negative exponents so both functions are power-bounded
                let build = |t: &[(i64, i64)]| {
                    let terms: Vec<(i64, PadicScalar)> = t
                        .iter()
                        .map(|&(i, c)| (i, ctx().from_int(c).shift(if i < 0 { -i } else { 0 })))
                        .collect();
                    LaurentSeries::from_terms(ctx(), ann.clone(), 6, terms).unwrap()
                };
                let (f, g) = (build(&f), build(&g));
                let fg = f.mul(&g).unwrap();
                prop_assume!(!fg.is_truncated());
                let (rf, rg) = (reduce_function(&f).unwrap(), reduce_function(&g).unwrap());
                prop_assert_eq!(reduce_function(&fg).unwrap(), rf.mul(&rg, 5));
                prop_assert_eq!(rf.s_poly[0], rf.t_poly[0]);
            }
        }
    }
}
