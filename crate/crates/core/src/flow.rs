//! Characteristics `x' = v(x)` on [0, 1] that stop permanently at the boundary.
//!
//! Integration is classical fixed-step RK4. A substep that would leave the
//! domain, or cross a knot of the gating function, is shortened by bisection
//! so that it ends exactly on the boundary or knot. At a boundary hit the
//! trajectory stops when `v` points outward or vanishes there; if `v` points
//! inward the hit was an overshoot and integration continues from the
//! boundary point.
//!
//! Alongside the position the integrator can carry the gating exponent
//! `G(t) = int_0^t f(x(s)) ds`, which gives the weight `w(t) = w(0) exp(G(t))`
//! of an atom transported along the characteristic.

use serde::{Deserialize, Serialize};

use crate::bl::{BLFunction, GatingFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    substep: f64,
    boundary_bisect_tol: f64,
}

impl IntegratorConfig {
    pub const DEFAULT_SUBSTEP: f64 = 1e-3;
    pub const DEFAULT_BISECT_TOL: f64 = 1e-12;

    pub fn new(substep: f64, boundary_bisect_tol: f64) -> Result<Self> {
        if !(substep > 0.0 && substep <= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "substep must lie in (0, 0.1], got {substep}"
            )));
        }
        if !(boundary_bisect_tol > 0.0 && boundary_bisect_tol <= 1e-10) {
            return Err(Error::InvalidParameter(format!(
                "boundary bisection tolerance must lie in (0, 1e-10], got {boundary_bisect_tol}"
            )));
        }
        Ok(IntegratorConfig {
            substep,
            boundary_bisect_tol,
        })
    }

    pub fn with_substep(substep: f64) -> Result<Self> {
        Self::new(substep, Self::DEFAULT_BISECT_TOL)
    }

    pub fn substep(&self) -> f64 {
        self.substep
    }

    pub fn boundary_bisect_tol(&self) -> f64 {
        self.boundary_bisect_tol
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            substep: Self::DEFAULT_SUBSTEP,
            boundary_bisect_tol: Self::DEFAULT_BISECT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowResult {
    pub position: f64,
    pub stopped: bool,
    /// Time at which the boundary was reached, present iff `stopped`.
    pub hit_time: Option<f64>,
}

/// State of one characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CharState {
    pub x: f64,
    pub log_gain: f64,
    pub stopped: bool,
    pub hit_time: Option<f64>,
}

impl From<CharState> for FlowResult {
    fn from(s: CharState) -> Self {
        FlowResult {
            position: s.x,
            stopped: s.stopped,
            hit_time: s.hit_time,
        }
    }
}

/// Does `v` at boundary point `b` point out of the domain (or vanish)?
fn stops_at(b: f64, vb: f64) -> bool {
    if b == 0.0 {
        vb <= 0.0
    } else {
        vb >= 0.0
    }
}

pub(crate) struct Characteristic<'a> {
    pub v: &'a BLFunction,
    pub gating: Option<&'a GatingFunction>,
    pub cfg: &'a IntegratorConfig,
}

impl<'a> Characteristic<'a> {
    #[inline]
    fn velocity(&self, x: f64) -> Result<f64> {
        let vx = self.v.eval(x.clamp(0.0, 1.0));
        if vx.is_finite() {
            Ok(vx)
        } else {
            Err(Error::NonFiniteVelocity(x))
        }
    }

    #[inline]
    fn rate(&self, f: &GatingFunction, x: f64, anchor: f64) -> Result<f64> {
        let fx = f.eval_on_piece_of(x.clamp(0.0, 1.0), anchor);
        if fx.is_finite() {
            Ok(fx)
        } else {
            Err(Error::NonFiniteGating(x))
        }
    }

    /// One RK4 step of size `h` for the pair `(x, G)`; returns the position
    /// and the increment of `G`. Gating stages use the piece of `f` that
    /// contains the midpoint of the step, so a step ending on a knot does not
    /// see the next piece.
    fn rk4(&self, x: f64, h: f64) -> Result<(f64, f64)> {
        let k1 = self.velocity(x)?;
        let x2 = x + 0.5 * h * k1;
        let k2 = self.velocity(x2)?;
        let x3 = x + 0.5 * h * k2;
        let k3 = self.velocity(x3)?;
        let x4 = x + h * k3;
        let k4 = self.velocity(x4)?;
        let x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let dg = match self.gating {
            Some(f) => {
                let anchor = (0.5 * (x + x_new)).clamp(0.0, 1.0);
                let g1 = self.rate(f, x, anchor)?;
                let g2 = self.rate(f, x2, anchor)?;
                let g3 = self.rate(f, x3, anchor)?;
                let g4 = self.rate(f, x4, anchor)?;
                h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
            }
            None => 0.0,
        };
        Ok((x_new, dg))
    }

    /// Initial state at `x0`, stopped at once if `x0` is a boundary point
    /// where `v` points outward.
    pub fn start(&self, x0: f64, t0: f64) -> Result<CharState> {
        let mut state = CharState {
            x: x0,
            log_gain: 0.0,
            stopped: false,
            hit_time: None,
        };
        if x0 == 0.0 || x0 == 1.0 {
            let vb = self.velocity(x0)?;
            if vb != 0.0 && stops_at(x0, vb) {
                state.stopped = true;
                state.hit_time = Some(t0);
            }
        }
        Ok(state)
    }

    /// Advance `state` from absolute time `t0` to `t1`.
    pub fn advance(&self, state: &mut CharState, t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        while t1 - t > 0.0 {
            if state.stopped {
                if let Some(f) = self.gating {
                    state.log_gain += self.rate(f, state.x, state.x)? * (t1 - t);
                }
                return Ok(());
            }
            let h = self.cfg.substep.min(t1 - t);
            let (x_trial, dg) = self.rk4(state.x, h)?;
            if !x_trial.is_finite() {
                return Err(Error::NonFiniteVelocity(state.x));
            }
            match self.first_event(state.x, x_trial) {
                None => {
                    state.x = x_trial;
                    state.log_gain += dg;
                    t += h;
                }
                Some(target) => {
                    let (s, dg) = self.locate(state.x, x_trial, target, h)?;
                    state.x = target;
                    state.log_gain += dg;
                    t += s;
                    if target == 0.0 || target == 1.0 {
                        let vb = self.velocity(target)?;
                        if stops_at(target, vb) {
                            state.stopped = true;
                            state.hit_time = Some(t.min(t1));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Nearest boundary or knot strictly crossed on the way from `x` to
    /// `x_trial`. A step ending within round-off of a boundary where `v`
    /// points strictly outward counts as reaching it.
    fn first_event(&self, x: f64, x_trial: f64) -> Option<f64> {
        let dir = x_trial - x;
        if dir == 0.0 {
            return None;
        }
        let mut best: Option<f64> = None;
        if let Some(f) = self.gating {
            let knots = f.knots();
            if dir > 0.0 {
                let i = knots.partition_point(|&k| k <= x);
                if let Some(&k) = knots.get(i) {
                    if x_trial > k {
                        best = Some(k);
                    }
                }
            } else {
                let i = knots.partition_point(|&k| k < x);
                if i > 0 && x_trial < knots[i - 1] {
                    best = Some(knots[i - 1]);
                }
            }
        }
        if best.is_none() {
            let tol = crate::measure::DOMAIN_TOLERANCE;
            if x_trial > 1.0 || (dir > 0.0 && x_trial >= 1.0 - tol && self.v.eval(1.0) > 0.0) {
                best = Some(1.0);
            } else if x_trial < 0.0 || (dir < 0.0 && x_trial <= tol && self.v.eval(0.0) < 0.0) {
                best = Some(0.0);
            }
        }
        best
    }

    /// Bisect the step length in `(0, h]` at which the RK4 step from `x`
    /// reaches `target`. Returns the (upper) step length and the matching
    /// increment of the gating exponent.
    fn locate(&self, x: f64, x_trial: f64, target: f64, h: f64) -> Result<(f64, f64)> {
        let dir = (x_trial - x).signum();
        let (mut lo, mut hi) = (0.0, h);
        let mut hi_dg = self.rk4(x, h)?.1;
        while hi - lo > self.cfg.boundary_bisect_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (xm, dgm) = self.rk4(x, mid)?;
            if (xm - target) * dir >= 0.0 {
                hi = mid;
                hi_dg = dgm;
            } else {
                lo = mid;
            }
        }
        Ok((hi, hi_dg))
    }
}

/// Integrate one characteristic from time `times[0]` and report its state at
/// every entry of `times` (sorted, non-decreasing).
pub(crate) fn integrate_characteristic(
    x0: f64,
    v: &BLFunction,
    gating: Option<&GatingFunction>,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<CharState>> {
    let ch = Characteristic { v, gating, cfg };
    let t0 = times.first().copied().unwrap_or(0.0);
    let mut state = ch.start(x0, t0)?;
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    for &ti in times {
        ch.advance(&mut state, t, ti)?;
        t = t.max(ti);
        out.push(state);
    }
    Ok(out)
}

/// The stopped flow `Phi_t(x0)`.
pub fn flow_map(x0: f64, t: f64, v: &BLFunction, cfg: &IntegratorConfig) -> Result<FlowResult> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::PositionOutOfDomain(x0));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("flow horizon must be finite and >= 0, got {t}")));
    }
    let states = integrate_characteristic(x0, v, None, &[0.0, t], cfg)?;
    Ok(states[1].into())
}

/// `|Phi_t(Phi_s(x0)) - Phi_{s+t}(x0)|`.
pub fn semigroup_defect(x0: f64, s: f64, t: f64, v: &BLFunction, cfg: &IntegratorConfig) -> Result<f64> {
    let mid = flow_map(x0, s, v, cfg)?;
    let two_step = flow_map(mid.position, t, v, cfg)?;
    let one_step = flow_map(x0, s + t, v, cfg)?;
    Ok((two_step.position - one_step.position).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn logistic() -> BLFunction {
        BLFunction::custom("x(1-x)", 0.25, 1.0, |x| x * (1.0 - x))
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1e-12).is_err());
        assert!(IntegratorConfig::new(0.2, 1e-12).is_err());
        assert!(IntegratorConfig::new(1e-3, 1e-9).is_err());
        assert!(IntegratorConfig::new(0.1, 1e-10).is_ok());
    }

    #[test]
    fn constant_speed() {
        let cfg = IntegratorConfig::default();
        let v = BLFunction::constant(1.0);
        let r = flow_map(0.3, 0.5, &v, &cfg).unwrap();
        assert_abs_diff_eq!(r.position, 0.8, epsilon = 1e-12);
        assert!(!r.stopped && r.hit_time.is_none());

        let r = flow_map(0.3, 1.0, &v, &cfg).unwrap();
        assert_eq!(r.position, 1.0);
        assert!(r.stopped);
        assert_abs_diff_eq!(r.hit_time.unwrap(), 0.7, epsilon = 1e-9);

        let left = flow_map(0.3, 1.0, &BLFunction::constant(-2.0), &cfg).unwrap();
        assert_eq!(left.position, 0.0);
        assert_abs_diff_eq!(left.hit_time.unwrap(), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let cfg = IntegratorConfig::default();
        let v = BLFunction::affine(0.0, -1.0);
        let r = flow_map(0.5, 2.0, &v, &cfg).unwrap();
        assert_abs_diff_eq!(r.position, 0.5 * (-2.0f64).exp(), epsilon = 1e-8);
        assert!(!r.stopped);
    }

    #[test]
    fn boundary_starts() {
        let cfg = IntegratorConfig::default();
        // outward at the start point: stopped immediately
        let r = flow_map(1.0, 0.3, &BLFunction::constant(1.0), &cfg).unwrap();
        assert!(r.stopped);
        assert_eq!(r.hit_time, Some(0.0));
        // inward: leaves the boundary
        let r = flow_map(0.0, 0.3, &BLFunction::constant(1.0), &cfg).unwrap();
        assert_abs_diff_eq!(r.position, 0.3, epsilon = 1e-12);
        assert!(!r.stopped);
        // vanishing velocity at the start: stays put, never flagged
        let r = flow_map(0.0, 5.0, &BLFunction::affine(0.0, 1.0), &cfg).unwrap();
        assert_eq!(r.position, 0.0);
        assert!(!r.stopped);
    }

    #[test]
    fn asymptotic_approach_is_not_stopped() {
        let cfg = IntegratorConfig::default();
        let r = flow_map(0.5, 30.0, &logistic(), &cfg).unwrap();
        assert!(!r.stopped);
        assert!(r.position <= 1.0 && r.position > 1.0 - 1e-9);
    }

    #[test]
    fn interior_equilibrium_is_reached() {
        // v pushes towards 0.9 from either side
        let v = BLFunction::affine(9.0, -10.0);
        let cfg = IntegratorConfig::with_substep(0.1).unwrap();
        let r = flow_map(0.95, 3.0, &v, &cfg).unwrap();
        assert!(!r.stopped);
        assert_abs_diff_eq!(r.position, 0.9, epsilon = 1e-6);
    }

    #[test]
    fn semigroup_examples() {
        let cfg = IntegratorConfig::default();
        assert_eq!(semigroup_defect(0.4, 0.3, 0.6, &BLFunction::constant(0.0), &cfg).unwrap(), 0.0);
        assert_eq!(semigroup_defect(0.9, 0.5, 0.5, &BLFunction::constant(1.0), &cfg).unwrap(), 0.0);
        let d = semigroup_defect(0.3, 0.7, 0.7, &logistic(), &cfg).unwrap();
        assert!(d <= 1e-8, "{d}");
    }

    #[test]
    fn logistic_matches_closed_form() {
        let cfg = IntegratorConfig::default();
        let x0: f64 = 0.3;
        let t: f64 = 1.4;
        let exact = x0 * t.exp() / (1.0 - x0 + x0 * t.exp());
        let r = flow_map(x0, t, &logistic(), &cfg).unwrap();
        assert_abs_diff_eq!(r.position, exact, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = IntegratorConfig::default();
        let v = BLFunction::constant(1.0);
        assert!(matches!(flow_map(1.2, 1.0, &v, &cfg), Err(Error::PositionOutOfDomain(_))));
        assert!(flow_map(0.2, -1.0, &v, &cfg).is_err());
        let nan = BLFunction::custom("nan", 1.0, 1.0, |_| f64::NAN);
        assert!(matches!(flow_map(0.2, 1.0, &nan, &cfg), Err(Error::NonFiniteVelocity(_))));
    }
}
