//! Dual bounded-Lipschitz (flat) norm of signed atomic measures.
//!
//! For atoms `x_1 < ... < x_n` (after coalescing) with weights `w_i`,
//!
//! ```text
//! ||mu||*_BL = max  sum_i w_i phi_i
//!              s.t. a + b <= 1,  |phi_i| <= a,  |phi_i - phi_{i+1}| <= b (x_{i+1} - x_i).
//! ```
//!
//! Only adjacent pairs need a Lipschitz constraint: in one dimension values on
//! the atoms with adjacent slopes at most `b` extend to [0, 1] by linear
//! interpolation with Lipschitz constant `b`, and values in `[-a, a]` stay
//! there under that interpolation (constant extension past the end atoms).
//!
//! [`flat_norm`] exploits the chain structure. For fixed `(a, b)` the inner
//! maximization is solved exactly by dynamic programming over concave
//! piecewise-linear value functions `V_i(p)` (best partial sum given
//! `phi_i = p`). The optimal value `h(a, b)` is concave and positively
//! homogeneous, so the optimum lies on `a + b = 1` and `lambda -> h(lambda,
//! 1 - lambda)` is maximized by golden-section search.
//!
//! [`flat_norm_lp`] solves the same program with the dense simplex in
//! [`crate::simplex`] after the substitution `phi_i = u_i - a`,
//! `0 <= u_i <= 2a`. It is accurate when adjacent atoms are well separated
//! but loses feasibility when gaps are tiny relative to the weights, which is
//! the typical shape of a difference of two nearby slices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{linear_combine, CoalescePolicy, ParticleMeasure};
use crate::mild::Trajectory;
use crate::simplex;

/// Slack used when checking certificates.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

const GOLDEN_ITERATIONS: usize = 90;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatNormCertificate {
    pub value: f64,
    /// Coalesced atom positions the certificate refers to.
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
    /// Values of the optimal test function at `positions`.
    pub optimal_phi: Vec<f64>,
    /// Sup bound `a` of the optimal test function.
    pub sup_part: f64,
    /// Lipschitz bound `b` of the optimal test function.
    pub lip_part: f64,
}

impl FlatNormCertificate {
    fn empty(positions: Vec<f64>, weights: Vec<f64>) -> Self {
        FlatNormCertificate {
            value: 0.0,
            positions,
            weights,
            optimal_phi: Vec::new(),
            sup_part: 0.0,
            lip_part: 0.0,
        }
    }

    /// Descriptions of any violated certificate invariant.
    pub fn violations(&self) -> Vec<String> {
        let tol = CERTIFICATE_TOLERANCE;
        let mut out = Vec::new();
        if self.sup_part < -tol || self.lip_part < -tol {
            out.push(format!("negative bounds a={} b={}", self.sup_part, self.lip_part));
        }
        if self.sup_part + self.lip_part > 1.0 + tol {
            out.push(format!("a + b = {} > 1", self.sup_part + self.lip_part));
        }
        for (i, &p) in self.optimal_phi.iter().enumerate() {
            if p.abs() > self.sup_part + tol {
                out.push(format!("|phi_{i}| = {} > a = {}", p.abs(), self.sup_part));
            }
        }
        for i in 1..self.optimal_phi.len() {
            let d = self.positions[i] - self.positions[i - 1];
            let jump = (self.optimal_phi[i] - self.optimal_phi[i - 1]).abs();
            if jump > self.lip_part * d + tol {
                out.push(format!("|phi_{i} - phi_{}| = {jump} > b d = {}", i - 1, self.lip_part * d));
            }
        }
        let paired: f64 = self.weights.iter().zip(&self.optimal_phi).map(|(w, p)| w * p).sum();
        if (paired - self.value).abs() > tol {
            out.push(format!("value {} differs from pairing {paired}", self.value));
        }
        out
    }
}

/// Concave piecewise-linear function given by its breakpoints, linear in
/// between, on the interval spanned by the first and last abscissa.
type Concave = Vec<(f64, f64)>;

fn concave_max(v: &Concave) -> (f64, f64) {
    v.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}

fn concave_eval(v: &Concave, x: f64) -> f64 {
    let k = v.partition_point(|p| p.0 < x);
    if k == 0 {
        return v[0].1;
    }
    if k == v.len() {
        return v[v.len() - 1].1;
    }
    let (x0, y0) = v[k - 1];
    let (x1, y1) = v[k];
    if x1 <= x0 {
        return y0.max(y1);
    }
    y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
}

/// `q -> max { V(p) : |p - q| <= r }` restricted to `[-a, a]`.
fn window_max(v: &Concave, r: f64, a: f64) -> Concave {
    let top = concave_max(v).1;
    let k1 = v.iter().position(|p| p.1 == top).unwrap_or(0);
    let k2 = v.iter().rposition(|p| p.1 == top).unwrap_or(v.len() - 1);
    let mut shifted: Concave = Vec::with_capacity(v.len() + 2);
    shifted.extend(v[..=k1].iter().map(|&(x, y)| (x - r, y)));
    shifted.extend(v[k2..].iter().map(|&(x, y)| (x + r, y)));
    let mut out: Concave = Vec::with_capacity(shifted.len() + 2);
    out.push((-a, concave_eval(&shifted, -a)));
    out.extend(shifted.iter().copied().filter(|p| p.0 > -a && p.0 < a));
    out.push((a, concave_eval(&shifted, a)));
    out
}

/// Value functions `V_1, ..., V_n` of the inner program for fixed `(a, b)`.
fn value_functions(xs: &[f64], ws: &[f64], a: f64, b: f64, keep: bool) -> (f64, Vec<Concave>) {
    let mut v: Concave = vec![(-a, -a * ws[0]), (a, a * ws[0])];
    let mut all = Vec::new();
    for i in 1..xs.len() {
        let g = window_max(&v, b * (xs[i] - xs[i - 1]), a);
        let next: Concave = g.into_iter().map(|(p, y)| (p, y + ws[i] * p)).collect();
        if keep {
            all.push(std::mem::replace(&mut v, next));
        } else {
            v = next;
        }
    }
    let best = concave_max(&v).1;
    if keep {
        all.push(v);
    }
    (best, all)
}

fn inner_value(xs: &[f64], ws: &[f64], lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    value_functions(xs, ws, lambda, 1.0 - lambda, false).0
}

/// Optimal `phi` for fixed `(a, b)` by backtracking through the value functions.
fn optimal_phi(xs: &[f64], ws: &[f64], a: f64, b: f64) -> Vec<f64> {
    let (_, vs) = value_functions(xs, ws, a, b, true);
    let n = xs.len();
    let mut phi = vec![0.0; n];
    phi[n - 1] = concave_max(&vs[n - 1]).0;
    for i in (0..n - 1).rev() {
        let r = b * (xs[i + 1] - xs[i]);
        let lo = (phi[i + 1] - r).max(-a);
        let hi = (phi[i + 1] + r).min(a);
        // a concave function is maximized over an interval at the clamp of its argmax
        phi[i] = concave_max(&vs[i]).0.clamp(lo.min(hi), hi);
    }
    phi
}

/// Flat norm with certificate.
pub fn flat_norm(mu: &ParticleMeasure) -> Result<FlatNormCertificate> {
    flat_norm_with(mu, CoalescePolicy::default())
}

pub fn flat_norm_with(mu: &ParticleMeasure, policy: CoalescePolicy) -> Result<FlatNormCertificate> {
    let reduced = mu.reduced(policy);
    let positions: Vec<f64> = reduced.positions().collect();
    let weights: Vec<f64> = reduced.weights().collect();
    if positions.is_empty() {
        return Ok(FlatNormCertificate::empty(positions, weights));
    }

    let g = |l: f64| inner_value(&positions, &weights, l);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if gc < gd {
            lo = c;
            c = d;
            gc = gd;
            d = lo + ratio * (hi - lo);
            gd = g(d);
        } else {
            hi = d;
            d = c;
            gd = gc;
            c = hi - ratio * (hi - lo);
            gc = g(c);
        }
    }
    let mut best = if gc >= gd { (c, gc) } else { (d, gd) };
    let at_one = g(1.0);
    if at_one > best.1 {
        best = (1.0, at_one);
    }
    let (a, b) = (best.0, 1.0 - best.0);

    let phi = optimal_phi(&positions, &weights, a, b);
    let value = weights.iter().zip(&phi).map(|(w, p)| w * p).sum::<f64>();
    if !value.is_finite() {
        return Err(Error::InvalidParameter("flat norm of a non-finite measure".into()));
    }
    Ok(FlatNormCertificate {
        value,
        positions,
        weights,
        optimal_phi: phi,
        sup_part: a,
        lip_part: b,
    })
}

/// Flat norm by the dense simplex; see the module notes on its range of
/// reliability.
pub fn flat_norm_lp(mu: &ParticleMeasure) -> Result<FlatNormCertificate> {
    let reduced = mu.reduced(CoalescePolicy::default());
    let n = reduced.len();
    let positions: Vec<f64> = reduced.positions().collect();
    let weights: Vec<f64> = reduced.weights().collect();
    if n == 0 {
        return Ok(FlatNormCertificate::empty(positions, weights));
    }

    // variables: u_0 .. u_{n-1}, a, b
    let nv = n + 2;
    let (ia, ib) = (n, n + 1);
    let mass: f64 = weights.iter().sum();
    let mut c = vec![0.0; nv];
    c[..n].copy_from_slice(&weights);
    c[ia] = -mass;

    let mut rows = Vec::with_capacity(1 + n + 2 * (n - 1));
    let mut rhs = Vec::with_capacity(rows.capacity());
    let mut row = vec![0.0; nv];
    row[ia] = 1.0;
    row[ib] = 1.0;
    rows.push(row);
    rhs.push(1.0);
    for i in 0..n {
        let mut row = vec![0.0; nv];
        row[i] = 1.0;
        row[ia] = -2.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for i in 0..n - 1 {
        let d = positions[i + 1] - positions[i];
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; nv];
            row[i] = sign;
            row[i + 1] = -sign;
            row[ib] = -d;
            rows.push(row);
            rhs.push(0.0);
        }
    }

    let budget = 50 * (nv + rows.len());
    let sol = simplex::maximize(&c, &rows, &rhs, budget)?;
    let a = sol.x[ia];
    let b = sol.x[ib];
    let optimal_phi: Vec<f64> = sol.x[..n].iter().map(|u| (u - a).clamp(-a, a)).collect();
    let value = weights.iter().zip(&optimal_phi).map(|(w, p)| w * p).sum::<f64>();
    Ok(FlatNormCertificate {
        value,
        positions,
        weights,
        optimal_phi,
        sup_part: a,
        lip_part: b,
    })
}

/// `||mu - nu||*_BL`.
pub fn flat_distance(mu: &ParticleMeasure, nu: &ParticleMeasure) -> Result<f64> {
    Ok(flat_norm(&linear_combine(1.0, mu, -1.0, nu))?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupFlatDistance {
    pub value: f64,
    /// Time at which the supremum is attained.
    pub argmax_time: f64,
    pub compared_times: usize,
    /// True when the sample grids were not nested and slices of the second
    /// trajectory were taken at the nearest sampled time.
    pub resampled: bool,
}

/// `sup_t ||mu_t - nu_t||*_BL` over the shared sample times.
pub fn sup_flat_distance(tr1: &Trajectory, tr2: &Trajectory) -> Result<f64> {
    Ok(sup_flat_distance_report(tr1, tr2)?.value)
}

pub fn sup_flat_distance_report(tr1: &Trajectory, tr2: &Trajectory) -> Result<SupFlatDistance> {
    if (tr1.end_time() - tr2.end_time()).abs() > 1e-12 {
        return Err(Error::IncompatibleTrajectories(format!(
            "time ranges [0, {}] and [0, {}] differ",
            tr1.end_time(),
            tr2.end_time()
        )));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &t) in tr1.times().iter().enumerate() {
        if let Some(j) = tr2.index_of(t) {
            pairs.push((t, i, j));
        }
    }
    let nested = pairs.len() == tr1.len().min(tr2.len());
    let resampled = !nested;
    if resampled {
        log::warn!("trajectory sample grids are not nested; comparing at nearest sampled times");
        pairs.clear();
        let (coarse, fine, swapped) = if tr1.len() <= tr2.len() { (tr1, tr2, false) } else { (tr2, tr1, true) };
        for (i, &t) in coarse.times().iter().enumerate() {
            let j = nearest_index(fine.times(), t);
            pairs.push(if swapped { (t, j, i) } else { (t, i, j) });
        }
    }
    let mut best = SupFlatDistance {
        value: 0.0,
        argmax_time: 0.0,
        compared_times: pairs.len(),
        resampled,
    };
    for (t, i, j) in pairs {
        let d = flat_distance(&tr1.slice(i), &tr2.slice(j))?;
        if d > best.value {
            best.value = d;
            best.argmax_time = t;
        }
    }
    Ok(best)
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let k = times.partition_point(|&s| s < t);
    match (k.checked_sub(1), times.get(k)) {
        (Some(lo), Some(&hi)) if (t - times[lo]) <= (hi - t) => lo,
        (Some(lo), None) => lo,
        _ => k,
    }
}
