//! Forward-Euler-like scheme for measure-dependent velocities `v[mu]`.
//!
//! On each partition interval `(t_j, t_{j+1}]` the velocity is frozen at
//! `v_j = v[mu_{t_j}]` and the slice is advanced with the fixed-velocity
//! mild solver. Refining the partition drives the approximations to the
//! mild solution; [`convergence_table`] measures the Cauchy gaps of dyadic
//! refinements in the sup-flat metric.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bl::{parse_point_list, split_head, parse_numbers, validate_discontinuity_condition, BLFunction, GatingFunction};
use crate::error::{Error, Result};
use crate::flat::sup_flat_distance_report;
use crate::flow::IntegratorConfig;
use crate::measure::ParticleMeasure;
use crate::mild::{evolve_atoms, Provenance, Trajectory};

/// Time grid `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    times: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter("a partition needs at least one interval".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter("a partition must start at 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("partition times must be strictly increasing".into()));
        }
        let mesh = times.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
        Ok(Partition { times, mesh })
    }

    /// `n` equal intervals of `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "uniform partition needs n >= 1 and horizon > 0 (got n={n}, T={horizon})"
            )));
        }
        let mut times: Vec<f64> = (0..=n).map(|j| horizon * (j as f64 / n as f64)).collect();
        times[n] = horizon;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Uniform partitions with `2^k` intervals for `k = 1..=k_max`.
pub fn dyadic_refinements(horizon: f64, k_max: u32) -> Result<Vec<Partition>> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    if k_max > 24 {
        return Err(Error::InvalidParameter(format!("k_max = {k_max} is unreasonably large")));
    }
    (1..=k_max).map(|k| Partition::uniform(horizon, 1usize << k)).collect()
}

#[derive(Clone)]
enum KernelShape {
    Linear(f64),
    GaussianAttraction { strength: f64, width: f64 },
    PiecewiseLinear(Box<BLFunction>),
    Custom { label: String, eval: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

/// Interaction kernel `K` on `[-1, 1]`, giving `v[mu](x) = sum_i w_i K(x - x_i)`.
#[derive(Clone)]
pub struct Kernel {
    shape: KernelShape,
    sup_bound: f64,
    lip_bound: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kernel({self}; sup {}, lip {})", self.sup_bound, self.lip_bound)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            KernelShape::Linear(s) => write!(f, "linear {s}"),
            KernelShape::GaussianAttraction { strength, width } => write!(f, "gaussian {strength} {width}"),
            KernelShape::PiecewiseLinear(p) => write!(f, "{p}"),
            KernelShape::Custom { label, .. } => write!(f, "custom {label}"),
        }
    }
}

impl Kernel {
    /// `K(z) = slope * z`; `slope < 0` is attractive.
    pub fn linear(slope: f64) -> Self {
        Kernel {
            shape: KernelShape::Linear(slope),
            sup_bound: slope.abs(),
            lip_bound: slope.abs(),
        }
    }

    /// `K(z) = -strength * z * exp(-(z / width)^2)`.
    pub fn gaussian_attraction(strength: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !strength.is_finite() {
            return Err(Error::InvalidParameter("gaussian kernel needs width > 0".into()));
        }
        // |z e^{-z^2/l^2}| peaks at z = l / sqrt 2
        let zmax = (width / std::f64::consts::SQRT_2).min(1.0);
        let sup = strength.abs() * zmax * (-(zmax / width).powi(2)).exp();
        Ok(Kernel {
            shape: KernelShape::GaussianAttraction { strength, width },
            sup_bound: sup,
            lip_bound: strength.abs(),
        })
    }

    /// Linear interpolation through points with abscissae in `[-1, 1]`.
    pub fn piecewise_linear(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|p| !(-1.0..=1.0).contains(&p.0)) {
            return Err(Error::InvalidParameter("kernel abscissae must lie in [-1, 1]".into()));
        }
        // shift to [0, 1] to reuse the interpolating BL function
        for p in &mut points {
            p.0 = 0.5 * (p.0 + 1.0);
        }
        let f = BLFunction::piecewise_linear(points)?;
        Ok(Kernel {
            sup_bound: f.sup_bound(),
            lip_bound: 0.5 * f.lip_bound(),
            shape: KernelShape::PiecewiseLinear(Box::new(f)),
        })
    }

    pub fn custom<F>(label: impl Into<String>, sup_bound: f64, lip_bound: f64, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel {
            shape: KernelShape::Custom {
                label: label.into(),
                eval: Arc::new(eval),
            },
            sup_bound,
            lip_bound,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match &self.shape {
            KernelShape::Linear(s) => s * z,
            KernelShape::GaussianAttraction { strength, width } => {
                let u = z / width;
                -strength * z * (-u * u).exp()
            }
            KernelShape::PiecewiseLinear(f) => f.eval(0.5 * (z + 1.0)),
            KernelShape::Custom { eval, .. } => eval(z),
        }
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    /// Parse `linear s`, `gaussian s l` or `piecewise_linear [(z0,y0),...]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = split_head(spec);
        let bad = |msg: String| Error::bad_spec(format!("kernel `{spec}`"), msg);
        match head {
            "linear" => match parse_numbers(rest).map_err(bad)?[..] {
                [s] => Ok(Kernel::linear(s)),
                _ => Err(bad("expected `linear s`".into())),
            },
            "gaussian" => match parse_numbers(rest).map_err(bad)?[..] {
                [s, l] => Kernel::gaussian_attraction(s, l).map_err(|e| bad(e.to_string())),
                _ => Err(bad("expected `gaussian s l`".into())),
            },
            "piecewise_linear" => {
                let pts = parse_point_list(rest).map_err(bad)?;
                Kernel::piecewise_linear(pts).map_err(|e| bad(e.to_string()))
            }
            other => Err(bad(format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// Constants of the velocity assumptions on a TV ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityBounds {
    /// `K_R >= ||v[mu]||_inf`
    pub sup: f64,
    /// `L_R >= |v[mu]|_L`
    pub lip: f64,
    /// `M_R` with `||v[mu] - v[nu]||_inf <= M_R ||mu - nu||*_BL`
    pub measure_lip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    FixedField,
    KernelConvolution,
    Custom,
}

type MeasureVelocity = Arc<dyn Fn(&ParticleMeasure, f64) -> f64 + Send + Sync>;
type BoundsFn = Arc<dyn Fn(f64) -> VelocityBounds + Send + Sync>;

#[derive(Clone)]
enum ModelInner {
    Fixed(BLFunction),
    Kernel(Kernel),
    Custom { label: String, eval: MeasureVelocity, bounds: BoundsFn },
}

/// A velocity field `v[mu](x)`, possibly depending on the current measure.
#[derive(Clone)]
pub struct VelocityModel {
    inner: ModelInner,
}

impl fmt::Debug for VelocityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VelocityModel({self})")
    }
}

impl fmt::Display for VelocityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inner {
            ModelInner::Fixed(v) => write!(f, "{v}"),
            ModelInner::Kernel(k) => write!(f, "kernel {k}"),
            ModelInner::Custom { label, .. } => write!(f, "custom {label}"),
        }
    }
}

impl VelocityModel {
    pub fn fixed(v: BLFunction) -> Self {
        VelocityModel {
            inner: ModelInner::Fixed(v),
        }
    }

    pub fn kernel(k: Kernel) -> Self {
        VelocityModel {
            inner: ModelInner::Kernel(k),
        }
    }

    /// A measure-dependent field with declared bounds per TV radius.
    pub fn custom<F, B>(label: impl Into<String>, eval: F, bounds: B) -> Self
    where
        F: Fn(&ParticleMeasure, f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> VelocityBounds + Send + Sync + 'static,
    {
        VelocityModel {
            inner: ModelInner::Custom {
                label: label.into(),
                eval: Arc::new(eval),
                bounds: Arc::new(bounds),
            },
        }
    }

    pub fn kind(&self) -> VelocityKind {
        match self.inner {
            ModelInner::Fixed(_) => VelocityKind::FixedField,
            ModelInner::Kernel(_) => VelocityKind::KernelConvolution,
            ModelInner::Custom { .. } => VelocityKind::Custom,
        }
    }

    pub fn is_measure_dependent(&self) -> bool {
        !matches!(self.inner, ModelInner::Fixed(_))
    }

    pub fn eval(&self, mu: &ParticleMeasure, x: f64) -> f64 {
        match &self.inner {
            ModelInner::Fixed(v) => v.eval(x),
            ModelInner::Kernel(k) => mu.pair(|y| k.eval(x - y)),
            ModelInner::Custom { eval, .. } => eval(mu, x),
        }
    }

    pub fn bounds(&self, radius: f64) -> VelocityBounds {
        match &self.inner {
            ModelInner::Fixed(v) => VelocityBounds {
                sup: v.sup_bound(),
                lip: v.lip_bound(),
                measure_lip: 0.0,
            },
            ModelInner::Kernel(k) => VelocityBounds {
                sup: k.sup_bound() * radius,
                lip: k.lip_bound() * radius,
                measure_lip: k.sup_bound() + k.lip_bound(),
            },
            ModelInner::Custom { bounds, .. } => bounds(radius),
        }
    }

    /// Parse `kernel <kernel spec>` or a fixed-field function spec.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = split_head(spec);
        if head == "kernel" {
            Ok(VelocityModel::kernel(Kernel::parse(rest)?))
        } else {
            Ok(VelocityModel::fixed(BLFunction::parse(spec)?))
        }
    }
}

/// The fixed field `x -> v[mu](x)`, with bounds instantiated at `R = ||mu||_TV`.
pub fn freeze_velocity(model: &VelocityModel, mu: &ParticleMeasure) -> BLFunction {
    match &model.inner {
        ModelInner::Fixed(v) => v.clone(),
        ModelInner::Kernel(k) => BLFunction::kernel_sum(k.clone(), mu.atoms().to_vec()),
        ModelInner::Custom { label, eval, bounds } => {
            let b = bounds(mu.tv_norm());
            let eval = eval.clone();
            let mu = mu.clone();
            BLFunction::custom(format!("{label} frozen"), b.sup, b.lip, move |x| eval(&mu, x))
        }
    }
}

/// Euler approximation sampled at the partition points.
pub fn euler_solve(
    nu0: &ParticleMeasure,
    model: &VelocityModel,
    f: &GatingFunction,
    alpha: &Partition,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    euler_solve_sampled(nu0, model, f, alpha, 1, cfg)
}

/// Euler approximation with `oversample` equal sub-samples per partition interval.
pub fn euler_solve_sampled(
    nu0: &ParticleMeasure,
    model: &VelocityModel,
    f: &GatingFunction,
    alpha: &Partition,
    oversample: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if oversample == 0 {
        return Err(Error::InvalidParameter("oversample must be >= 1".into()));
    }
    let mut xs: Vec<f64> = nu0.positions().collect();
    let mut ws: Vec<f64> = nu0.weights().collect();
    let mut times = vec![0.0];
    let mut all_x = vec![xs.clone()];
    let mut all_w = vec![ws.clone()];
    let mut warned = false;

    for win in alpha.times().windows(2) {
        let (t0, t1) = (win[0], win[1]);
        let slice = ParticleMeasure::new(xs.iter().copied().zip(ws.iter().copied()))?;
        let v = freeze_velocity(model, &slice);
        if !warned && !f.breakpoints().is_empty() && !validate_discontinuity_condition(f, &v).is_empty() {
            log::warn!("frozen velocity vanishes on a gating jump at t = {t0}");
            warned = true;
        }
        let mut local: Vec<f64> = (0..=oversample)
            .map(|m| t0 + (t1 - t0) * (m as f64 / oversample as f64))
            .collect();
        local[oversample] = t1;
        let (px, pw) = evolve_atoms(&xs, &ws, &v, f, &local, cfg)?;
        for ((t, x), w) in local.iter().zip(px).zip(pw).skip(1) {
            times.push(*t);
            all_x.push(x);
            all_w.push(w);
        }
        xs = all_x.last().unwrap().clone();
        ws = all_w.last().unwrap().clone();
    }

    Trajectory::from_parts(
        times,
        all_x,
        all_w,
        Provenance::new(
            model.to_string(),
            f.to_string(),
            format!("euler N={} oversample={oversample}", alpha.intervals()),
            cfg.substep(),
        ),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub intervals: usize,
    pub mesh: f64,
    /// `sup_t ||mu^k_t - mu^{k+1}_t||*_BL` over the level-`k` partition points.
    pub sup_flat_gap: f64,
    /// Gap divided by the previous row's gap.
    pub ratio: Option<f64>,
}

/// Euler trajectories on the dyadic partitions `k = 1..=k_max`.
pub fn dyadic_euler_levels(
    nu0: &ParticleMeasure,
    model: &VelocityModel,
    f: &GatingFunction,
    horizon: f64,
    k_max: u32,
    oversample: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<Trajectory>> {
    let parts = dyadic_refinements(horizon, k_max)?;
    parts
        .par_iter()
        .map(|p| euler_solve_sampled(nu0, model, f, p, oversample, cfg))
        .collect()
}

/// Cauchy gaps between consecutive levels; `levels[i]` is dyadic level `i + 1`.
pub fn convergence_rows(levels: &[Trajectory]) -> Result<Vec<ConvergenceRow>> {
    let gaps: Vec<(usize, f64)> = levels
        .par_windows(2)
        .enumerate()
        .map(|(i, w)| {
            let intervals = 1usize << (i + 1);
            sup_flat_distance_report(&w[0], &w[1]).map(|r| (intervals, r.value))
        })
        .collect::<Result<_>>()?;
    let horizon = levels.first().map(|t| t.end_time()).unwrap_or(0.0);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(gaps.len());
    for (i, (intervals, gap)) in gaps.into_iter().enumerate() {
        let k = i as u32 + 1;
        // undefined when the previous gap vanished
        let ratio = rows.last().filter(|prev| prev.sup_flat_gap > 0.0).map(|prev| gap / prev.sup_flat_gap);
        rows.push(ConvergenceRow {
            k,
            intervals,
            mesh: horizon / intervals as f64,
            sup_flat_gap: gap,
            ratio,
        });
    }
    Ok(rows)
}

/// Sup-flat gaps between consecutive dyadic Euler refinements `k, k+1` for
/// `k = 1..k_max`.
pub fn convergence_table(
    nu0: &ParticleMeasure,
    model: &VelocityModel,
    f: &GatingFunction,
    horizon: f64,
    k_max: u32,
    cfg: &IntegratorConfig,
) -> Result<Vec<ConvergenceRow>> {
    if k_max < 2 {
        return Err(Error::InvalidParameter("convergence table needs k_max >= 2".into()));
    }
    let levels = dyadic_euler_levels(nu0, model, f, horizon, k_max, 1, cfg)?;
    convergence_rows(&levels)
}

/// First-order Richardson extrapolation from mesh `h` (coarse) and `h/2` (fine).
pub fn richardson_extrapolate(coarse: f64, fine: f64) -> f64 {
    2.0 * fine - coarse
}

/// Rows `k,N_k,mesh,sup_flat_gap,ratio`; the first ratio is empty.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "N_k", "mesh", "sup_flat_gap", "ratio"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.intervals.to_string(),
            r.mesh.to_string(),
            r.sup_flat_gap.to_string(),
            r.ratio.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::sup_flat_distance;
    use crate::mild::mild_solve;
    use approx::assert_abs_diff_eq;

    fn two_atoms() -> ParticleMeasure {
        ParticleMeasure::new([(0.25, 0.5), (0.75, 0.5)]).unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.1, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        let p = Partition::new(vec![0.0, 0.1, 0.5, 1.0]).unwrap();
        assert_eq!(p.mesh(), 0.5);
        assert_eq!(p.intervals(), 3);
    }

    #[test]
    fn dyadic_examples() {
        let parts = dyadic_refinements(1.0, 3).unwrap();
        assert_eq!(parts.len(), 3);
        let p3 = &parts[2];
        assert_eq!(p3.times(), &[0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0]);
        assert_eq!(p3.mesh(), 0.125);
        let parts = dyadic_refinements(2.5, 10).unwrap();
        for w in parts.windows(2) {
            assert_eq!(w[1].mesh(), 0.5 * w[0].mesh());
        }
        assert!(dyadic_refinements(1.0, 0).is_err());
    }

    #[test]
    fn freezing_linear_kernel() {
        let v = freeze_velocity(&VelocityModel::kernel(Kernel::linear(-1.0)), &two_atoms());
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            // direct summation oracle
            let direct = 0.5 * (0.25 - x) + 0.5 * (0.75 - x);
            assert_abs_diff_eq!(v.eval(x), direct, epsilon = 1e-15);
            assert_abs_diff_eq!(v.eval(x), 0.5 - x, epsilon = 1e-15);
        }
        let zero = freeze_velocity(&VelocityModel::kernel(Kernel::linear(-1.0)), &ParticleMeasure::zero());
        assert_eq!(zero.eval(0.3), 0.0);
        let fixed = VelocityModel::fixed(BLFunction::affine(0.2, 0.1));
        assert_eq!(freeze_velocity(&fixed, &two_atoms()).eval(0.5), 0.25);
        assert_eq!(freeze_velocity(&fixed, &ParticleMeasure::zero()).eval(0.5), 0.25);
    }

    #[test]
    fn frozen_bounds_hold() {
        let model = VelocityModel::kernel(Kernel::gaussian_attraction(2.0, 0.3).unwrap());
        let mu = ParticleMeasure::new([(0.1, 0.4), (0.5, -0.3), (0.8, 1.1)]).unwrap();
        let v = freeze_velocity(&model, &mu);
        assert!(v.spot_check(4001).is_empty());
        let b = model.bounds(mu.tv_norm());
        assert!(v.sup_bound() <= b.sup + 1e-15 && v.lip_bound() <= b.lip + 1e-15);
    }

    #[test]
    fn single_interval_matches_mild_solve() {
        let cfg = IntegratorConfig::default();
        let model = VelocityModel::kernel(Kernel::gaussian_attraction(1.0, 0.5).unwrap());
        let f = GatingFunction::continuous(BLFunction::affine(-0.5, 0.3));
        let nu = ParticleMeasure::new([(0.1, 0.2), (0.6, 0.7), (0.9, 0.1)]).unwrap();
        let euler = euler_solve(&nu, &model, &f, &Partition::uniform(1.0, 1).unwrap(), &cfg).unwrap();
        let mild = mild_solve(&nu, &freeze_velocity(&model, &nu), &f, 1.0, &[], &cfg).unwrap();
        assert_eq!(euler.last_slice(), mild.last_slice());
    }

    #[test]
    fn measure_independent_model_matches_mild_solve() {
        let cfg = IntegratorConfig::default();
        let v = BLFunction::custom("x(1-x)", 0.25, 1.0, |x| x * (1.0 - x));
        let model = VelocityModel::fixed(v.clone());
        let f = GatingFunction::continuous(BLFunction::affine(0.3, -0.6));
        let nu = ParticleMeasure::new([(0.0, 0.2), (0.3, 0.7), (0.95, 0.1)]).unwrap();
        for n in [1usize, 3, 8] {
            let alpha = Partition::uniform(1.5, n).unwrap();
            let euler = euler_solve(&nu, &model, &f, &alpha, &cfg).unwrap();
            let mild = mild_solve(&nu, &v, &f, 1.5, alpha.times(), &cfg).unwrap();
            assert!(sup_flat_distance(&euler, &mild).unwrap() <= 1e-10);
        }
        let rows = convergence_table(&nu, &model, &f, 1.5, 4, &cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.sup_flat_gap <= 1e-10));
    }

    #[test]
    fn linear_kernel_tracks_closed_form() {
        let cfg = IntegratorConfig::default();
        let model = VelocityModel::kernel(Kernel::linear(-1.0));
        let alpha = Partition::uniform(1.0, 16).unwrap();
        let traj = euler_solve(&two_atoms(), &model, &GatingFunction::zero(), &alpha, &cfg).unwrap();
        let end: Vec<f64> = traj.last_slice().positions().collect();
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(end[0], 0.5 - 0.25 * e, epsilon = 1e-6);
        assert_abs_diff_eq!(end[1], 0.5 + 0.25 * e, epsilon = 1e-6);
    }

    #[test]
    fn convergence_csv_format() {
        let rows = vec![
            ConvergenceRow { k: 1, intervals: 2, mesh: 0.5, sup_flat_gap: 0.1, ratio: None },
            ConvergenceRow { k: 2, intervals: 4, mesh: 0.25, sup_flat_gap: 0.05, ratio: Some(0.5) },
        ];
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k,N_k,mesh,sup_flat_gap,ratio\n1,2,0.5,0.1,\n2,4,0.25,0.05,0.5\n");
    }

    #[test]
    fn kernel_grammar() {
        assert_eq!(Kernel::parse("linear -1").unwrap().eval(0.5), -0.5);
        let g = Kernel::parse("gaussian 2 0.25").unwrap();
        assert!(g.eval(0.1) < 0.0 && g.eval(-0.1) > 0.0);
        let p = Kernel::parse("piecewise_linear [(-1,1),(0,0),(1,-1)]").unwrap();
        assert_abs_diff_eq!(p.eval(0.5), -0.5, epsilon = 1e-15);
        assert_eq!(p.lip_bound(), 1.0);
        assert!(Kernel::parse("cubic 1").is_err());
        assert!(Kernel::parse("gaussian 1 0").is_err());
        let m = VelocityModel::parse("kernel linear -1").unwrap();
        assert_eq!(m.kind(), VelocityKind::KernelConvolution);
        let m = VelocityModel::parse("constant 1").unwrap();
        assert_eq!(m.kind(), VelocityKind::FixedField);
    }

    #[test]
    fn richardson() {
        // error c h: coarse = L + 2c h, fine = L + c h
        assert_abs_diff_eq!(richardson_extrapolate(1.2, 1.1), 1.0, epsilon = 1e-15);
    }
}
