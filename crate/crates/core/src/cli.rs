//! Command-line front end: argument parsing, input grammars, dispatch and the
//! exit-code vocabulary.

use std::ffi::OsString;
use std::fmt;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cartan::{cartan_factor, default_max_iter, CartanError, LaurentMatrix};
use crate::cech::{build_cech, cohomology, default_threshold, CechError, CechSpaceSpec, CohomologyReport};
use crate::models::{
    disc_model_dual_tree, j_expansion, j_expansion_text, j_valuation, specialize, tate_cover_disjoint,
    tate_dual_graph, tate_orbit_normalize, tate_retract, universal_cover_lift, DiscModelSpec, DualGraph, ModelError,
    TateParams, DEFAULT_J_BUDGET,
};
use crate::padic::{PadicContext, PadicError};
use crate::points::{gm_retract, join, parse_point, path_breakpoints, scalar_text, seminorm_val, DiscPoint, PointError};
use crate::series::{Chart, LaurentSeries, SeriesError};
use crate::val::{parse_rational, RationalVal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
pub const EXIT_NONCONVERGENCE: i32 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn precondition(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_PRECONDITION, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CechError> for CliError {
    fn from(e: CechError) -> Self {
        let code = match e {
            CechError::Precision { .. } => EXIT_PRECISION,
            _ => EXIT_USAGE,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<CartanError> for CliError {
    fn from(e: CartanError) -> Self {
        let code = match e {
            CartanError::NotNearIdentity(_) => EXIT_PRECONDITION,
            CartanError::NonConvergence { .. } | CartanError::InverseDiverged => EXIT_NONCONVERGENCE,
            CartanError::Shape => EXIT_USAGE,
            CartanError::Series(_) => EXIT_PRECONDITION,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<PointError> for CliError {
    fn from(e: PointError) -> Self {
        let code = match e {
            PointError::Parse(_) | PointError::InfiniteRadius => EXIT_USAGE,
            PointError::Indistinguishable(..) => EXIT_PRECISION,
            _ => EXIT_PRECONDITION,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Point(p) => p.into(),
            ModelError::BadBreakPoints | ModelError::NoBreakPoints | ModelError::NoTerms | ModelError::BadVq(_) => {
                CliError::usage(e.to_string())
            }
            e => CliError::precondition(e),
        }
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        CliError::precondition(e)
    }
}

impl From<PadicError> for CliError {
    fn from(e: PadicError) -> Self {
        match e {
            PadicError::NotPrime(_) | PadicError::ZeroPrecision | PadicError::PrecisionTooLarge { .. } | PadicError::Parse(_) => {
                CliError::usage(e.to_string())
            }
            e => CliError::precondition(e),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Parser, Debug)]
#[command(name = "rigidkit", version, about = "p-adic Laurent series, Čech cohomology, Cartan factorization and Tate-curve models")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Residue characteristic.
    #[arg(short = 'p', long = "prime", global = true, default_value_t = 5)]
    pub prime: u64,
    /// Relative p-adic precision.
    #[arg(short = 'N', long = "precision", global = true, default_value_t = 8)]
    pub precision: u32,
    /// Exponent window: series live on exponents in [-D, D].
    #[arg(short = 'D', long = "window", global = true, default_value_t = 10)]
    pub window: u32,
    /// Valuation at which an elementary divisor counts as zero (default N - 2).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub threshold: Option<i64>,
    /// Output format; graph commands default to dot, all others to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Čech cohomology of the structure sheaf on a named two-piece cover.
    #[command(subcommand)]
    Cech(CechCmd),
    /// Factor a matrix near the identity on a circle as B = B1* B2*.
    Factor {
        /// Sparse matrix file, or `-` for stdin.
        file: String,
        /// Requested valuation of the residual.
        #[arg(long, default_value = "10")]
        target: String,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Points of the adic disc and of G_m.
    #[command(subcommand)]
    Point(PointCmd),
    /// Formal models of the unit disc.
    #[command(subcommand)]
    Model(ModelCmd),
    /// The Tate curve.
    #[command(subcommand)]
    Tate(TateCmd),
}

#[derive(Subcommand, Debug)]
pub enum CechCmd {
    /// Projective line covered by |T| <= 1 and |T| >= 1.
    P1,
    /// Annulus a <= v(T) <= b split at s0.
    Annulus {
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        s0: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
    },
    /// Tate curve with v(q) = vq.
    Tate {
        #[arg(long)]
        vq: String,
    },
    /// Boundary of the closed bidisc minus its interior, a non-affinoid.
    Bidisc,
}

#[derive(Subcommand, Debug)]
pub enum PointCmd {
    /// Valuation of f at a point (rank 2 at type-5 points).
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long)]
        at: String,
        /// Chart of f as `[a,b]`; default the unit disc.
        #[arg(long, allow_hyphen_values = true)]
        chart: Option<String>,
    },
    /// Smallest closed disc containing two points.
    Join { x: String, y: String },
    /// Breakpoints of the geodesic between two points.
    Path { x: String, y: String },
    /// Retraction of G_m onto its skeleton.
    Retract { x: String },
    /// Target of the specialization map of a disc model.
    Specialize {
        /// Model vertices separated by `;`; the Gauss point is added if missing.
        #[arg(long, default_value = "η(0, 0)")]
        model: String,
        x: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelCmd {
    /// Dual tree of the special fibre.
    Tree {
        #[arg(long, default_value = "η(0, 0)")]
        model: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum TateCmd {
    /// Orbit representative with skeleton coordinate in [0, vq).
    Normalize {
        #[arg(long)]
        vq: String,
        x: String,
    },
    /// Retraction onto the skeleton circle.
    Retract {
        #[arg(long)]
        vq: String,
        x: String,
    },
    /// Lift a skeleton coordinate to a given sheet of the universal cover.
    Lift {
        #[arg(long)]
        vq: String,
        #[arg(long)]
        s: String,
        #[arg(long, allow_hyphen_values = true)]
        sheet: i64,
    },
    /// Dual graph of the model cut at the given skeleton break points.
    Dualgraph {
        #[arg(long)]
        vq: String,
        /// Comma-separated values in [0, vq).
        #[arg(long)]
        breaks: String,
    },
    /// Coefficients of q^-1, q^0, q^1, ... of the j-invariant.
    Jinv {
        #[arg(long, default_value_t = 3)]
        terms: usize,
        /// Also report v(j) = -vq.
        #[arg(long)]
        vq: Option<String>,
    },
    /// Whether U_n and its translate by q^m are disjoint.
    Disjoint {
        #[arg(long)]
        vq: String,
        #[arg(long, allow_hyphen_values = true)]
        n: i64,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
    },
}

/// Validated global settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub ctx: PadicContext,
    pub window: u32,
    pub threshold: i64,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        if g.precision < 4 {
            return Err(CliError::usage(format!("precision N must be at least 4, got {}", g.precision)));
        }
        if g.window < 1 {
            return Err(CliError::usage("window D must be at least 1"));
        }
        let ctx = PadicContext::new(g.prime, g.precision)?;
        let threshold = g.threshold.unwrap_or_else(|| default_threshold(ctx));
        if threshold >= g.precision as i64 {
            return Err(CliError::usage(format!("threshold {threshold} must be below N = {}", g.precision)));
        }
        Ok(RunConfig { ctx, window: g.window, threshold, format: g.format })
    }

    fn format_or(&self, default: Format, allowed: &[Format]) -> Result<Format, CliError> {
        let f = self.format.unwrap_or(default);
        if !allowed.contains(&f) {
            return Err(CliError::usage(format!("format {f:?} is not available for this command")));
        }
        Ok(f)
    }
}

// ------------------------------------------------------------------ grammars

fn rational(s: &str) -> Result<RationalVal, CliError> {
    s.trim().parse::<RationalVal>().map_err(|e| CliError::usage(e.to_string()))
}

fn finite_rational(s: &str) -> Result<RationalVal, CliError> {
    parse_rational(s).map(RationalVal::Finite).map_err(|e| CliError::usage(e.to_string()))
}

/// `[a,b]` with `a` finite or `-inf` and `b` finite or `+inf`.
pub fn parse_chart(s: &str) -> Result<Chart, CliError> {
    let err = || CliError::usage(format!("cannot parse chart `{s}`"));
    let inner = s.trim().strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(err)?;
    let (a, b) = inner.split_once(',').ok_or_else(err)?;
    let b = rational(b)?;
    let chart = match a.trim() {
        "-inf" | "-∞" => Chart::inverse_disc(b),
        a => Chart::new(finite_rational(a)?, b),
    };
    chart.map_err(|e| CliError::usage(e.to_string()))
}

/// Terms of a series: either sparse `exp:coeff` pairs separated by commas or
/// whitespace, or a polynomial such as `T^2 - 5 + 1/5*T^-1`.
pub fn parse_series_terms(s: &str) -> Result<Vec<(i64, RationalVal)>, CliError> {
    let err = |what: &str| CliError::usage(format!("cannot parse series `{s}`: {what}"));
    let t = s.trim();
    if t.is_empty() || t == "0" {
        return Ok(vec![]);
    }
    if t.contains(':') {
        return t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|x| !x.is_empty())
            .map(|pair| {
                let (e, c) = pair.split_once(':').ok_or_else(|| err(pair))?;
                let e: i64 = e.trim().parse().map_err(|_| err(pair))?;
                Ok((e, finite_rational(c)?))
            })
            .collect();
    }
    // polynomial syntax: split into signed terms, keeping `^-k` intact
    let compact: String = t.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms = Vec::new();
    let mut current = String::new();
    for (i, ch) in compact.char_indices() {
        let after_caret = compact[..i].ends_with('^');
        if (ch == '+' || ch == '-') && i > 0 && !after_caret {
            terms.push(std::mem::take(&mut current));
        }
        current.push(ch);
    }
    terms.push(current);
    let mut out = Vec::new();
    for term in terms {
        let (sign, body) = match term.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1, term.strip_prefix('+').unwrap_or(&term)),
        };
        if body.is_empty() {
            return Err(err("empty term"));
        }
        let (coeff, exp) = match body.split_once('T') {
            None => (body, 0),
            Some((c, e)) => {
                let c = c.strip_suffix('*').unwrap_or(c);
                let exp = match e {
                    "" => 1,
                    e => e.strip_prefix('^').and_then(|k| k.parse().ok()).ok_or_else(|| err(body))?,
                };
                (if c.is_empty() { "1" } else { c }, exp)
            }
        };
        let c = finite_rational(coeff)?;
        out.push((exp, &c * &num_rational::BigRational::from_integer(sign.into())));
    }
    Ok(out)
}

fn series_from_terms(
    ctx: PadicContext,
    chart: Chart,
    window: u32,
    terms: &[(i64, RationalVal)],
) -> Result<LaurentSeries, CliError> {
    let scalars = terms.iter().map(|(e, c)| (*e, ctx.from_rational(c.finite().expect("finite coefficient"))));
    LaurentSeries::from_terms(ctx, chart, window, scalars).map_err(|e| CliError::usage(e.to_string()))
}

/// Sparse matrix file, one statement per line, `#` starts a comment:
///
/// ```text
/// n = 2
/// circle = 0
/// (1,1) = 0:1
/// (1,2) = -1:5
/// ```
#[derive(Clone, Debug)]
pub struct MatrixFile {
    pub n: usize,
    pub circle: RationalVal,
    pub window: Option<u32>,
    pub entries: Vec<(usize, usize, Vec<(i64, RationalVal)>)>,
}

pub fn parse_matrix_file(text: &str) -> Result<MatrixFile, CliError> {
    let mut n = None;
    let mut circle = RationalVal::zero();
    let mut window = None;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = || CliError::usage(format!("line {}: cannot parse `{raw}`", lineno + 1));
        let (lhs, rhs) = line.split_once('=').ok_or_else(err)?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        match lhs {
            "n" => n = Some(rhs.parse::<usize>().map_err(|_| err())?),
            "circle" => circle = finite_rational(rhs)?,
            "window" => window = Some(rhs.parse::<u32>().map_err(|_| err())?),
            _ => {
                let idx = lhs.strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(err)?;
                let (i, j) = idx.split_once(',').ok_or_else(err)?;
                let i: usize = i.trim().parse().map_err(|_| err())?;
                let j: usize = j.trim().parse().map_err(|_| err())?;
                entries.push((i, j, parse_series_terms(rhs)?));
            }
        }
    }
    let n = n.ok_or_else(|| CliError::usage("matrix file needs a line `n = <size>`"))?;
    if n == 0 {
        return Err(CliError::usage("matrix size must be positive"));
    }
    for (i, j, _) in &entries {
        if *i < 1 || *j < 1 || *i > n || *j > n {
            return Err(CliError::usage(format!("entry ({i},{j}) outside a {n}x{n} matrix")));
        }
    }
    Ok(MatrixFile { n, circle, window, entries })
}

impl MatrixFile {
    pub fn to_matrix(&self, ctx: PadicContext, default_window: u32) -> Result<LaurentMatrix, CliError> {
        let chart = Chart::circle(self.circle.clone()).map_err(|e| CliError::usage(e.to_string()))?;
        let needed = self.entries.iter().flat_map(|(_, _, t)| t.iter().map(|(e, _)| e.unsigned_abs() as u32)).max().unwrap_or(0);
        let window = self.window.unwrap_or(default_window).max(needed).max(1);
        let mut cells: Vec<Vec<(i64, RationalVal)>> = vec![Vec::new(); self.n * self.n];
        for (i, j, t) in &self.entries {
            cells[(i - 1) * self.n + (j - 1)].extend(t.iter().cloned());
        }
        let entries = cells
            .iter()
            .map(|t| series_from_terms(ctx, chart.clone(), window, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LaurentMatrix::from_entries(self.n, entries)?)
    }
}

fn parse_model(ctx: &PadicContext, s: &str) -> Result<DiscModelSpec, CliError> {
    let mut vertices = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        vertices.push(parse_point(ctx, part)?);
    }
    let gauss = DiscPoint::gauss(*ctx);
    if !vertices.iter().any(|v| v.is_equiv(&gauss)) {
        vertices.insert(0, gauss);
    }
    Ok(DiscModelSpec::new(*ctx, vertices)?)
}

fn parse_breaks(s: &str) -> Result<Vec<RationalVal>, CliError> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(finite_rational).collect()
}

fn tate_params(ctx: PadicContext, vq: &str) -> Result<TateParams, CliError> {
    Ok(TateParams::standard(ctx, finite_rational(vq)?)?)
}

// ------------------------------------------------------------------ output

fn to_json<T: Serialize>(x: &T) -> String {
    // round-trip through Value so object keys come out sorted
    let v: Value = serde_json::to_value(x).expect("serializable");
    serde_json::to_string(&v).expect("serializable")
}

fn sparse_matrix(m: &LaurentMatrix) -> Value {
    let mut out = Vec::new();
    for i in 0..m.size() {
        for j in 0..m.size() {
            let terms: Vec<Value> = m.get(i, j).terms().map(|(e, c)| json!([e, scalar_text(c)])).collect();
            if !terms.is_empty() {
                out.push(json!({"i": i + 1, "j": j + 1, "terms": terms}));
            }
        }
    }
    Value::Array(out)
}

fn cech_text(r: &CohomologyReport) -> String {
    let mut s = format!("{}: dim H^0 = {}, dim H^1 = {}\n", r.spec, r.dims[0], r.dims[1]);
    for g in &r.grades {
        let divs: Vec<String> = g.divisors.iter().map(ToString::to_string).collect();
        s.push_str(&format!("  grade {}: h0 = {}, h1 = {}, divisors [{}]\n", g.g, g.h0, g.h1, divs.join(", ")));
    }
    for f in &r.truncation_flags {
        s.push_str(&format!("  note: {f}\n"));
    }
    s
}

fn graph_text(g: &DualGraph) -> String {
    let mut s = format!("{} vertices, {} edges, b1 = {}\n", g.vertices.len(), g.edges.len(), g.b1);
    for (i, v) in g.vertices.iter().enumerate() {
        s.push_str(&format!("  v{i}: {} ({:?})\n", v.label, v.kind));
    }
    for (a, b) in &g.edges {
        s.push_str(&format!("  v{a} -- v{b}\n"));
    }
    s
}

fn emit_graph(cfg: &RunConfig, g: &DualGraph) -> Result<String, CliError> {
    Ok(match cfg.format_or(Format::Dot, &[Format::Dot, Format::Json, Format::Text])? {
        Format::Dot => g.to_dot(),
        Format::Json => to_json(g),
        Format::Text => graph_text(g),
    })
}

// ------------------------------------------------------------------ dispatch

fn point(cfg: &RunConfig, s: &str) -> Result<DiscPoint, CliError> {
    Ok(parse_point(&cfg.ctx, s)?)
}

fn run_cech(cfg: &RunConfig, cmd: &CechCmd) -> Result<String, CliError> {
    let spec = match cmd {
        CechCmd::P1 => CechSpaceSpec::ProjLine,
        CechCmd::Annulus { a, s0, b } => CechSpaceSpec::Annulus { a: rational(a)?, s0: rational(s0)?, b: rational(b)? },
        CechCmd::Tate { vq } => CechSpaceSpec::TateCurve { vq: rational(vq)? },
        CechCmd::Bidisc => CechSpaceSpec::BidiscBoundary,
    };
    let format = cfg.format_or(Format::Json, &[Format::Json, Format::Text])?;
    let report = cohomology(&build_cech(&spec, cfg.window, cfg.ctx)?, cfg.threshold)?;
    Ok(match format {
        Format::Text => cech_text(&report),
        _ => to_json(&report),
    })
}

fn run_factor(cfg: &RunConfig, file: &str, target: &str, max_iter: Option<usize>) -> Result<String, CliError> {
    let text = if file == "-" {
        std::io::read_to_string(std::io::stdin()).map_err(|e| CliError::usage(e.to_string()))?
    } else {
        std::fs::read_to_string(file).map_err(|e| CliError::usage(format!("{file}: {e}")))?
    };
    let format = cfg.format_or(Format::Json, &[Format::Json, Format::Text])?;
    let b = parse_matrix_file(&text)?.to_matrix(cfg.ctx, cfg.window)?;
    let target = rational(target)?;
    let id = LaurentMatrix::identity(cfg.ctx, b.size(), b.chart().clone(), b.window());
    let v1 = crate::cartan::matrix_sup_val(&b.sub(&id)?);
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(&target, &v1));
    let f = cartan_factor(&b, &target, max_iter)?;
    if format == Format::Text {
        let trace: Vec<String> = f.decay_trace.iter().map(ToString::to_string).collect();
        return Ok(format!(
            "iterations {}, residual {}, decay [{}]\nB1* =\n{}B2* =\n{}",
            f.iterations,
            f.residual_val,
            trace.join(", "),
            f.b1,
            f.b2
        ));
    }
    let mut v = serde_json::to_value(f.summary()).expect("serializable");
    v["b1"] = sparse_matrix(&f.b1);
    v["b2"] = sparse_matrix(&f.b2);
    v["initial_val"] = serde_json::to_value(&f.initial_val).expect("serializable");
    Ok(serde_json::to_string(&v).expect("serializable"))
}

fn run_point(cfg: &RunConfig, cmd: &PointCmd) -> Result<String, CliError> {
    let format = cfg.format_or(Format::Json, &[Format::Json, Format::Text])?;
    let text = format == Format::Text;
    Ok(match cmd {
        PointCmd::Eval { f, at, chart } => {
            let chart = match chart {
                Some(c) => parse_chart(c)?,
                None => Chart::unit_disc(),
            };
            let terms = parse_series_terms(f)?;
            let needed = terms.iter().map(|(e, _)| e.unsigned_abs() as u32).max().unwrap_or(0);
            let series = series_from_terms(cfg.ctx, chart, cfg.window.max(needed), &terms)?;
            let x = point(cfg, at)?;
            let v = seminorm_val(&series, &x)?;
            if text {
                format!("v(f({x})) = {v}\n")
            } else {
                to_json(&json!({ "val": v }))
            }
        }
        PointCmd::Join { x, y } => {
            let j = join(&point(cfg, x)?, &point(cfg, y)?)?;
            if text {
                format!("{j}\n")
            } else {
                to_json(&json!({ "join": j.to_string() }))
            }
        }
        PointCmd::Path { x, y } => {
            let path: Vec<String> = path_breakpoints(&point(cfg, x)?, &point(cfg, y)?)?.iter().map(ToString::to_string).collect();
            if text {
                format!("{}\n", path.join(" -> "))
            } else {
                to_json(&json!({ "breakpoints": path }))
            }
        }
        PointCmd::Retract { x } => {
            let r = gm_retract(&point(cfg, x)?)?;
            if text {
                format!("{r}\n")
            } else {
                to_json(&json!({ "retract": r }))
            }
        }
        PointCmd::Specialize { model, x } => {
            let m = parse_model(&cfg.ctx, model)?;
            let t = specialize(&m, &point(cfg, x)?)?;
            if text {
                format!("{}\n", t.describe(&m))
            } else {
                let vertices: Vec<String> = m.vertices().iter().map(ToString::to_string).collect();
                to_json(&json!({ "target": t, "description": t.describe(&m), "vertices": vertices }))
            }
        }
    })
}

fn run_tate(cfg: &RunConfig, cmd: &TateCmd) -> Result<String, CliError> {
    if let TateCmd::Dualgraph { vq, breaks } = cmd {
        let params = tate_params(cfg.ctx, vq)?;
        return emit_graph(cfg, &tate_dual_graph(&parse_breaks(breaks)?, &params)?);
    }
    let format = cfg.format_or(Format::Json, &[Format::Json, Format::Text])?;
    let text = format == Format::Text;
    Ok(match cmd {
        TateCmd::Normalize { vq, x } => {
            let params = tate_params(cfg.ctx, vq)?;
            let (rep, sheet) = tate_orbit_normalize(&point(cfg, x)?, &params)?;
            let r = gm_retract(&rep)?;
            if text {
                format!("{rep} on sheet {sheet}, skeleton coordinate {r}\n")
            } else {
                to_json(&json!({ "representative": rep.to_string(), "sheet": sheet, "retract": r }))
            }
        }
        TateCmd::Retract { vq, x } => {
            let r = tate_retract(&point(cfg, x)?, &tate_params(cfg.ctx, vq)?)?;
            if text {
                format!("{r}\n")
            } else {
                to_json(&json!({ "retract": r }))
            }
        }
        TateCmd::Lift { vq, s, sheet } => {
            let l = universal_cover_lift(&finite_rational(s)?, *sheet, &tate_params(cfg.ctx, vq)?)?;
            if text {
                format!("{l}\n")
            } else {
                to_json(&json!({ "lift": l }))
            }
        }
        TateCmd::Jinv { terms, vq } => {
            let coeffs = j_expansion(*terms, DEFAULT_J_BUDGET)?;
            let array = format!("[{}]", coeffs.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
            match (text, vq) {
                (true, None) => format!("j = {} + ...\n", j_expansion_text(&coeffs)),
                (true, Some(vq)) => {
                    format!("j = {} + ...\nv(j) = {}\n", j_expansion_text(&coeffs), j_valuation(&tate_params(cfg.ctx, vq)?))
                }
                (false, None) => array,
                (false, Some(vq)) => {
                    // coefficients can exceed 64 bits, so the object is assembled by hand
                    let jv = to_json(&j_valuation(&tate_params(cfg.ctx, vq)?));
                    format!("{{\"coefficients\":{array},\"j_valuation\":{jv}}}")
                }
            }
        }
        TateCmd::Disjoint { vq, n, m } => {
            let d = tate_cover_disjoint(*n, *m, &tate_params(cfg.ctx, vq)?);
            if text {
                format!("{d}\n")
            } else {
                to_json(&json!({ "disjoint": d }))
            }
        }
        TateCmd::Dualgraph { .. } => unreachable!("handled above"),
    })
}

/// Run a parsed command; the string is the stdout payload.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = RunConfig::from_args(&cli.global)?;
    match &cli.command {
        Command::Cech(c) => run_cech(&cfg, c),
        Command::Factor { file, target, max_iter } => run_factor(&cfg, file, target, *max_iter),
        Command::Point(c) => run_point(&cfg, c),
        Command::Model(ModelCmd::Tree { model }) => {
            let m = parse_model(&cfg.ctx, model)?;
            emit_graph(&cfg, &disc_model_dual_tree(&m))
        }
        Command::Tate(c) => run_tate(&cfg, c),
    }
}

/// Outcome of a full invocation: exit code, stdout, stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: rendered }
            } else {
                Outcome { code: EXIT_OK, stdout: rendered, stderr: String::new() }
            };
        }
    };
    match execute(&cli) {
        Ok(mut out) => {
            if !out.ends_with('\n') {
                out.push('\n');
            }
            Outcome { code: EXIT_OK, stdout: out, stderr: String::new() }
        }
        Err(e) => Outcome { code: e.code, stdout: String::new(), stderr: format!("error: {}\n", e.message) },
    }
}
