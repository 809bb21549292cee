//! Bounded-Lipschitz functions on [0, 1] and piecewise gating functions.
//!
//! Every [`BLFunction`] carries a certified sup bound and Lipschitz bound.
//! Built-in shapes have analytic bounds; custom closures must declare theirs,
//! and [`BLFunction::spot_check`] samples them for obvious violations.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::euler::Kernel;
use crate::measure::Atom;

/// Velocities with magnitude at or below this are treated as zero when checking
/// discontinuities of the gating function.
pub const ZERO_VELOCITY_TOLERANCE: f64 = 1e-9;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Constant(f64),
    Affine { intercept: f64, slope: f64 },
    PiecewiseLinear(Vec<(f64, f64)>),
    BoundaryLayer(u32),
    Product(Box<BLFunction>, Box<BLFunction>),
    KernelSum { kernel: Kernel, atoms: Vec<Atom> },
    Custom { label: String, eval: Evaluator },
}

#[derive(Clone)]
pub struct BLFunction {
    shape: Shape,
    sup_bound: f64,
    lip_bound: f64,
}

impl fmt::Debug for BLFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BLFunction({self}; sup {}, lip {})", self.sup_bound, self.lip_bound)
    }
}

impl fmt::Display for BLFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Constant(c) => write!(f, "constant {c}"),
            Shape::Affine { intercept, slope } => write!(f, "affine {intercept} {slope}"),
            Shape::PiecewiseLinear(pts) => {
                let body: Vec<String> = pts.iter().map(|(x, y)| format!("({x},{y})")).collect();
                write!(f, "piecewise_linear [{}]", body.join(","))
            }
            Shape::BoundaryLayer(n) => write!(f, "boundary_layer {n}"),
            Shape::Product(a, b) => write!(f, "product({a}; {b})"),
            Shape::KernelSum { kernel, atoms } => {
                write!(f, "kernel_sum({kernel}; {} atoms)", atoms.len())
            }
            Shape::Custom { label, .. } => write!(f, "custom {label}"),
        }
    }
}

/// A sampled violation of a declared bound.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundViolation {
    Sup { x: f64, value: f64, bound: f64 },
    Lipschitz { x: f64, y: f64, quotient: f64, bound: f64 },
}

impl BLFunction {
    pub fn constant(c: f64) -> Self {
        BLFunction {
            shape: Shape::Constant(c),
            sup_bound: c.abs(),
            lip_bound: 0.0,
        }
    }

    /// `x -> intercept + slope * x`.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        BLFunction {
            shape: Shape::Affine { intercept, slope },
            sup_bound: intercept.abs().max((intercept + slope).abs()),
            lip_bound: slope.abs(),
        }
    }

    /// Linear interpolation through `points`, held constant outside the first
    /// and last abscissa.
    pub fn piecewise_linear(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("piecewise_linear needs at least one point".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidParameter("piecewise_linear points must be finite".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "piecewise_linear abscissae must be distinct".into(),
            ));
        }
        if points.first().unwrap().0 < 0.0 || points.last().unwrap().0 > 1.0 {
            return Err(Error::InvalidParameter("piecewise_linear abscissae must lie in [0, 1]".into()));
        }
        let sup_bound = points.iter().fold(0.0f64, |m, (_, y)| m.max(y.abs()));
        let lip_bound = points
            .windows(2)
            .fold(0.0f64, |m, w| m.max(((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()));
        Ok(BLFunction {
            shape: Shape::PiecewiseLinear(points),
            sup_bound,
            lip_bound,
        })
    }

    /// Tent-ramp sink layer `-max(0, 1 - n x) - max(0, 1 - n (1 - x))`.
    pub fn boundary_layer(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("boundary layer index n must be >= 1".into()));
        }
        Ok(BLFunction {
            shape: Shape::BoundaryLayer(n),
            sup_bound: 1.0,
            lip_bound: n as f64,
        })
    }

    /// A user-supplied function with declared bounds. The bounds are trusted;
    /// use [`BLFunction::spot_check`] to sample them.
    pub fn custom<F>(label: impl Into<String>, sup_bound: f64, lip_bound: f64, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        BLFunction {
            shape: Shape::Custom {
                label: label.into(),
                eval: Arc::new(eval),
            },
            sup_bound,
            lip_bound,
        }
    }

    pub(crate) fn kernel_sum(kernel: Kernel, atoms: Vec<Atom>) -> Self {
        let tv = atoms.iter().fold(0.0, |acc, a| acc + a.weight.abs());
        BLFunction {
            sup_bound: kernel.sup_bound() * tv,
            lip_bound: kernel.lip_bound() * tv,
            shape: Shape::KernelSum { kernel, atoms },
        }
    }

    /// Pointwise product, with bounds `sup = s1 s2` and `lip = s1 l2 + s2 l1`.
    pub fn product(&self, other: &BLFunction) -> BLFunction {
        BLFunction {
            sup_bound: self.sup_bound * other.sup_bound,
            lip_bound: self.sup_bound * other.lip_bound + other.sup_bound * self.lip_bound,
            shape: Shape::Product(Box::new(self.clone()), Box::new(other.clone())),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant(c) => *c,
            Shape::Affine { intercept, slope } => intercept + slope * x,
            Shape::PiecewiseLinear(pts) => interpolate(pts, x),
            Shape::BoundaryLayer(n) => {
                let n = *n as f64;
                -(1.0 - n * x).max(0.0) - (1.0 - n * (1.0 - x)).max(0.0)
            }
            Shape::Product(a, b) => a.eval(x) * b.eval(x),
            Shape::KernelSum { kernel, atoms } => atoms
                .iter()
                .fold(0.0, |acc, a| acc + a.weight * kernel.eval(x - a.position)),
            Shape::Custom { eval, .. } => eval(x),
        }
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// `||phi||_BL = ||phi||_inf + |phi|_L`, from the certified bounds.
    pub fn bl_norm(&self) -> f64 {
        self.sup_bound + self.lip_bound
    }

    /// Interior points in (0, 1) where the derivative may jump.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = match &self.shape {
            Shape::PiecewiseLinear(pts) => pts.iter().map(|p| p.0).collect(),
            Shape::BoundaryLayer(n) => {
                let h = 1.0 / *n as f64;
                vec![h, 1.0 - h]
            }
            Shape::Product(a, b) => {
                let mut k = a.kinks();
                k.extend(b.kinks());
                k
            }
            _ => Vec::new(),
        };
        out.retain(|x| *x > 0.0 && *x < 1.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Sample the declared bounds on a uniform grid of `samples` points,
    /// checking the sup bound at every point and the Lipschitz bound on
    /// adjacent pairs. An empty result means no violation was observed.
    pub fn spot_check(&self, samples: usize) -> Vec<BoundViolation> {
        let samples = samples.max(2);
        let slack = 1e-9;
        let mut out = Vec::new();
        let xs: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        for (&x, &v) in xs.iter().zip(&vals) {
            if !(v.abs() <= self.sup_bound * (1.0 + slack) + slack) {
                out.push(BoundViolation::Sup {
                    x,
                    value: v,
                    bound: self.sup_bound,
                });
            }
        }
        for i in 1..samples {
            let q = (vals[i] - vals[i - 1]).abs() / (xs[i] - xs[i - 1]);
            if !(q <= self.lip_bound * (1.0 + slack) + slack) {
                out.push(BoundViolation::Lipschitz {
                    x: xs[i - 1],
                    y: xs[i],
                    quotient: q,
                    bound: self.lip_bound,
                });
            }
        }
        out
    }

    /// Parse `constant c`, `affine a b`, `piecewise_linear [(x0,y0),...]` or
    /// `boundary_layer n`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = split_head(spec);
        let bad = |msg: &str| Error::bad_spec(format!("function `{spec}`"), msg);
        match head {
            "constant" => {
                let args = parse_numbers(rest).map_err(|m| bad(&m))?;
                match args[..] {
                    [c] => Ok(BLFunction::constant(c)),
                    _ => Err(bad("expected `constant c`")),
                }
            }
            "affine" => {
                let args = parse_numbers(rest).map_err(|m| bad(&m))?;
                match args[..] {
                    [a, b] => Ok(BLFunction::affine(a, b)),
                    _ => Err(bad("expected `affine a b`")),
                }
            }
            "piecewise_linear" => {
                let pts = parse_point_list(rest).map_err(|m| bad(&m))?;
                BLFunction::piecewise_linear(pts).map_err(|e| bad(&e.to_string()))
            }
            "boundary_layer" => {
                let n: u32 = rest.trim().parse().map_err(|_| bad("expected `boundary_layer n`"))?;
                BLFunction::boundary_layer(n).map_err(|e| bad(&e.to_string()))
            }
            other => Err(bad(&format!("unknown function kind `{other}`"))),
        }
    }
}

fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    // first index with abscissa > x
    let hi = pts.partition_point(|p| p.0 <= x);
    let (x0, y0) = pts[hi - 1];
    let (x1, y1) = pts[hi];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub(crate) fn split_head(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim()),
        None => (s, ""),
    }
}

pub(crate) fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// Parse `[(x0, y0), (x1, y1), ...]`.
pub(crate) fn parse_point_list(s: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list of pairs, found `{s}`"))?;
    let mut out = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| format!("expected `(` at `{rest}`"))?;
        let close = open.find(')').ok_or_else(|| "unterminated pair".to_string())?;
        let nums = parse_numbers(&open[..close])?;
        if nums.len() != 2 {
            return Err(format!("pair `({})` must have two entries", &open[..close]));
        }
        out.push((nums[0], nums[1]));
        rest = open[close + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Piece {
    start: f64,
    end: f64,
    func: BLFunction,
}

/// Piecewise bounded-Lipschitz weight `f` of the gating term `f * mu`.
///
/// Pieces are half-open `[start, end)` and tile [0, 1]; the last piece also
/// owns `x = 1`. At a jump the function takes its right-hand value unless a
/// direction of travel says otherwise (see [`GatingFunction::eval_directed`]).
#[derive(Debug, Clone)]
pub struct GatingFunction {
    pieces: Vec<Piece>,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
}

impl fmt::Display for GatingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.len() == 1 {
            return write!(f, "{}", self.pieces[0].func);
        }
        let parts: Vec<String> = self
            .pieces
            .iter()
            .map(|p| format!("[{}, {}): {}", p.start, p.end, p.func))
            .collect();
        write!(f, "piecewise {{{}}}", parts.join("; "))
    }
}

impl GatingFunction {
    /// A gating function given by a single function on all of [0, 1].
    pub fn continuous(func: BLFunction) -> Self {
        Self::from_pieces(vec![(0.0, 1.0, func)]).expect("single piece tiles [0, 1]")
    }

    pub fn zero() -> Self {
        Self::continuous(BLFunction::constant(0.0))
    }

    /// Build from `(start, end, func)` triples that tile [0, 1] in order.
    pub fn from_pieces(pieces: Vec<(f64, f64, BLFunction)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("gating function needs at least one piece".into()));
        }
        if pieces[0].0 != 0.0 || pieces[pieces.len() - 1].1 != 1.0 {
            return Err(Error::InvalidParameter("gating pieces must start at 0 and end at 1".into()));
        }
        for (s, e, _) in &pieces {
            if !(s < e) {
                return Err(Error::InvalidParameter(format!("empty gating piece [{s}, {e})")));
            }
        }
        if pieces.windows(2).any(|w| w[0].1 != w[1].0) {
            return Err(Error::InvalidParameter("gating pieces must be contiguous".into()));
        }
        let pieces: Vec<Piece> = pieces
            .into_iter()
            .map(|(start, end, func)| Piece { start, end, func })
            .collect();

        let mut breakpoints = Vec::new();
        let mut knots = Vec::new();
        for w in pieces.windows(2) {
            let b = w[0].end;
            knots.push(b);
            if (w[0].func.eval(b) - w[1].func.eval(b)).abs() > 1e-12 {
                breakpoints.push(b);
            }
        }
        for p in &pieces {
            knots.extend(p.func.kinks().into_iter().filter(|k| *k > p.start && *k < p.end));
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        Ok(GatingFunction {
            pieces,
            breakpoints,
            knots,
        })
    }

    /// `steps [(x0, y0), (x1, y1), ...]` with `x0 = 0`: value `y_j` on `[x_j, x_{j+1})`.
    pub fn piecewise_constant(steps: &[(f64, f64)]) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("piecewise_constant needs at least one step".into()));
        }
        let mut pieces = Vec::with_capacity(steps.len());
        for (j, &(x, y)) in steps.iter().enumerate() {
            let end = steps.get(j + 1).map(|s| s.0).unwrap_or(1.0);
            pieces.push((x, end, BLFunction::constant(y)));
        }
        Self::from_pieces(pieces)
    }

    fn piece_index(&self, x: f64) -> usize {
        // last piece whose start is <= x
        self.pieces
            .partition_point(|p| p.start <= x)
            .saturating_sub(1)
    }

    /// Right-continuous evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.pieces.len() == 1 {
            return self.pieces[0].func.eval(x);
        }
        self.pieces[self.piece_index(x)].func.eval(x)
    }

    /// Evaluate at `x` for a point travelling in direction `direction`: at a
    /// piece boundary, leftward motion (`direction < 0`) sees the left piece.
    #[inline]
    pub fn eval_directed(&self, x: f64, direction: f64) -> f64 {
        if self.pieces.len() == 1 {
            return self.pieces[0].func.eval(x);
        }
        let mut i = self.piece_index(x);
        if direction < 0.0 && i > 0 && self.pieces[i].start == x {
            i -= 1;
        }
        self.pieces[i].func.eval(x)
    }

    /// Evaluate the piece that contains `anchor` at `x`, extending that
    /// piece's formula past its ends if needed.
    #[inline]
    pub(crate) fn eval_on_piece_of(&self, x: f64, anchor: f64) -> f64 {
        if self.pieces.len() == 1 {
            return self.pieces[0].func.eval(x);
        }
        self.pieces[self.piece_index(anchor)].func.eval(x)
    }

    /// Interior jump locations.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Every interior point where the function or its derivative may jump.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().fold(0.0f64, |m, p| m.max(p.func.sup_bound()))
    }

    /// Largest Lipschitz bound over the pieces (jumps excluded).
    pub fn piecewise_lip_bound(&self) -> f64 {
        self.pieces.iter().fold(0.0f64, |m, p| m.max(p.func.lip_bound()))
    }

    pub fn is_continuous(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// As a single [`BLFunction`], when there are no jumps.
    pub fn as_bl_function(&self) -> Option<BLFunction> {
        if !self.is_continuous() {
            return None;
        }
        if self.pieces.len() == 1 {
            return Some(self.pieces[0].func.clone());
        }
        let this = self.clone();
        Some(BLFunction::custom(
            self.to_string(),
            self.sup_norm(),
            self.piecewise_lip_bound(),
            move |x| this.eval(x),
        ))
    }

    /// Parse the function grammar of [`BLFunction::parse`], plus
    /// `piecewise_constant [(0,y0),(x1,y1),...]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = split_head(spec);
        if head == "piecewise_constant" {
            let pts = parse_point_list(rest).map_err(|m| Error::bad_spec(format!("gating `{spec}`"), m))?;
            return Self::piecewise_constant(&pts)
                .map_err(|e| Error::bad_spec(format!("gating `{spec}`"), e.to_string()));
        }
        Ok(Self::continuous(BLFunction::parse(spec)?))
    }
}

/// A family `n -> f_n` of gating functions approximating boundary sinks.
pub trait GatingFamily: Send + Sync {
    fn member(&self, n: u32) -> Result<GatingFunction>;
    fn name(&self) -> String;
}

/// `f_n(x) = -max(0, 1 - n x) - max(0, 1 - n (1 - x))`: ramps of width `1/n`
/// from `-1` at each endpoint to `0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TentRampLayers;

impl GatingFamily for TentRampLayers {
    fn member(&self, n: u32) -> Result<GatingFunction> {
        Ok(GatingFunction::continuous(BLFunction::boundary_layer(n)?))
    }

    fn name(&self) -> String {
        "tent_ramp".into()
    }
}

pub fn boundary_layer_family(n: u32) -> Result<GatingFunction> {
    TentRampLayers.member(n)
}

/// Breakpoints of `f` where `|v| <= ZERO_VELOCITY_TOLERANCE`.
pub fn validate_discontinuity_condition(f: &GatingFunction, v: &BLFunction) -> Vec<f64> {
    f.breakpoints()
        .iter()
        .copied()
        .filter(|&x| v.eval(x).abs() <= ZERO_VELOCITY_TOLERANCE)
        .collect()
}
