//! Weak-formulation defect of a trajectory.
//!
//! For a test function `psi` with `d_x psi = 0` at `x = 0, 1` the defect is
//!
//! ```text
//! | <mu_T, psi(T)> - <mu_0, psi(0)>
//!   - int_0^T <mu_t, d_t psi + d_x psi v[mu_t]> dt - int_0^T <f mu_t, psi> dt |
//! ```
//!
//! with both time integrals taken by the composite trapezoid rule over the
//! trajectory's sample times.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bl::{BLFunction, GatingFunction};
use crate::error::{Error, Result};
use crate::euler::{freeze_velocity, VelocityModel};
use crate::measure::ParticleMeasure;
use crate::mild::{apply_gating, Trajectory};

/// Tolerance of the boundary-condition gate.
pub const BOUNDARY_GATE_TOLERANCE: f64 = 1e-12;
/// Number of time samples checked by the gate.
pub const BOUNDARY_GATE_SAMPLES: usize = 1000;

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Sup bounds of `psi`, `d_x psi` and `d_t psi` on `[0,1] x [0,T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunctionBounds {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
}

/// A test function `psi(x, t)` with vanishing spatial derivative at `x = 0, 1`.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    value: Field,
    dx: Field,
    dt: Field,
    bounds: TestFunctionBounds,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({}; {:?})", self.id, self.bounds)
    }
}

impl TestFunction {
    /// Build a test function, rejecting it if `d_x psi` does not vanish at the
    /// endpoints or any field is non-finite on a grid of `[0, horizon]`.
    pub fn new<V, DX, DT>(
        id: impl Into<String>,
        horizon: f64,
        bounds: TestFunctionBounds,
        value: V,
        dx: DX,
        dt: DT,
    ) -> Result<Self>
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        DX: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        DT: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let psi = TestFunction {
            id: id.into(),
            value: Arc::new(value),
            dx: Arc::new(dx),
            dt: Arc::new(dt),
            bounds,
        };
        psi.check_boundary_conditions(horizon)?;
        Ok(psi)
    }

    fn check_boundary_conditions(&self, horizon: f64) -> Result<()> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let m = BOUNDARY_GATE_SAMPLES;
        for j in 0..m {
            let t = horizon * j as f64 / (m - 1) as f64;
            for x in [0.0, 1.0] {
                let d = (self.dx)(x, t);
                if !(d.abs() <= BOUNDARY_GATE_TOLERANCE) {
                    return Err(Error::InvalidTestFunction(format!(
                        "{}: d_x psi({x}, {t}) = {d} does not vanish",
                        self.id
                    )));
                }
            }
            for i in 0..=16 {
                let x = i as f64 / 16.0;
                if !((self.value)(x, t).is_finite() && (self.dt)(x, t).is_finite()) {
                    return Err(Error::InvalidTestFunction(format!(
                        "{}: non-finite value at ({x}, {t})",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bounds(&self) -> TestFunctionBounds {
        self.bounds
    }

    #[inline]
    pub fn value(&self, x: f64, t: f64) -> f64 {
        (self.value)(x, t)
    }

    #[inline]
    pub fn dx(&self, x: f64, t: f64) -> f64 {
        (self.dx)(x, t)
    }

    #[inline]
    pub fn dt(&self, x: f64, t: f64) -> f64 {
        (self.dt)(x, t)
    }
}

#[derive(Debug, Clone, Copy)]
enum TimeFactor {
    One,
    Ramp,
    Cosine,
}

impl TimeFactor {
    fn label(self) -> &'static str {
        match self {
            TimeFactor::One => "one",
            TimeFactor::Ramp => "ramp",
            TimeFactor::Cosine => "cos",
        }
    }

    fn eval(self, t: f64, horizon: f64) -> (f64, f64) {
        match self {
            TimeFactor::One => (1.0, 0.0),
            TimeFactor::Ramp => (t / horizon, 1.0 / horizon),
            TimeFactor::Cosine => {
                let w = PI / horizon;
                ((w * t).cos(), -w * (w * t).sin())
            }
        }
    }

    fn bounds(self, horizon: f64) -> (f64, f64) {
        match self {
            TimeFactor::One => (1.0, 0.0),
            TimeFactor::Ramp => (1.0, 1.0 / horizon),
            TimeFactor::Cosine => (1.0, PI / horizon),
        }
    }
}

/// `g(t) cos(k pi x)` for `k = 0..=max_mode` and `g` in `{1, t/T, cos(pi t/T)}`.
pub fn test_function_catalog(horizon: f64, max_mode: u32) -> Result<Vec<TestFunction>> {
    let mut out = Vec::with_capacity(3 * (max_mode as usize + 1));
    for g in [TimeFactor::One, TimeFactor::Ramp, TimeFactor::Cosine] {
        for k in 0..=max_mode {
            let w = k as f64 * PI;
            let (g_sup, dg_sup) = g.bounds(horizon);
            let bounds = TestFunctionBounds {
                value: g_sup,
                dx: g_sup * w,
                dt: dg_sup,
            };
            let id = format!("{}_k{k}", g.label());
            let psi = TestFunction::new(
                id,
                horizon,
                bounds,
                move |x, t| g.eval(t, horizon).0 * (w * x).cos(),
                move |x, t| -g.eval(t, horizon).0 * w * (w * x).sin(),
                move |x, t| g.eval(t, horizon).1 * (w * x).cos(),
            );
            out.push(psi?);
        }
    }
    Ok(out)
}

/// Per-slice data shared by every test function.
struct PreparedTrajectory {
    times: Vec<f64>,
    slices: Vec<ParticleMeasure>,
    gated: Vec<ParticleMeasure>,
    velocities: Vec<BLFunction>,
}

impl PreparedTrajectory {
    fn new(traj: &Trajectory, model: &VelocityModel, f: &GatingFunction) -> Result<Self> {
        if traj.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "weak defect needs at least 3 slices, trajectory has {}",
                traj.len()
            )));
        }
        let slices: Vec<ParticleMeasure> = traj.slices().collect();
        let gated = slices.iter().map(|mu| apply_gating(mu, f)).collect();
        let velocities = slices.par_iter().map(|mu| freeze_velocity(model, mu)).collect();
        Ok(PreparedTrajectory {
            times: traj.times().to_vec(),
            slices,
            gated,
            velocities,
        })
    }

    fn defect(&self, psi: &TestFunction) -> Result<f64> {
        let n = self.times.len();
        let integrand: Vec<f64> = (0..n)
            .map(|i| {
                let t = self.times[i];
                let v = &self.velocities[i];
                let transport = self.slices[i].pair(|x| psi.dt(x, t) + psi.dx(x, t) * v.eval(x));
                let source = self.gated[i].pair(|x| psi.value(x, t));
                transport + source
            })
            .collect();
        let mut rhs = 0.0;
        for i in 1..n {
            rhs += 0.5 * (self.times[i] - self.times[i - 1]) * (integrand[i] + integrand[i - 1]);
        }
        let t_end = self.times[n - 1];
        let lhs = self.slices[n - 1].pair(|x| psi.value(x, t_end)) - self.slices[0].pair(|x| psi.value(x, 0.0));
        let defect = (lhs - rhs).abs();
        if !defect.is_finite() {
            return Err(Error::NonFiniteVelocity(defect));
        }
        Ok(defect)
    }
}

/// Absolute weak-form defect of `traj` against `psi`.
pub fn weak_defect(traj: &Trajectory, model: &VelocityModel, f: &GatingFunction, psi: &TestFunction) -> Result<f64> {
    PreparedTrajectory::new(traj, model, f)?.defect(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectRow {
    pub psi_id: String,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectSweep {
    pub rows: Vec<DefectRow>,
    pub max_defect: f64,
}

/// [`weak_defect`] for every catalog entry, in catalog order.
pub fn defect_sweep(
    traj: &Trajectory,
    model: &VelocityModel,
    f: &GatingFunction,
    catalog: &[TestFunction],
) -> Result<DefectSweep> {
    let prepared = PreparedTrajectory::new(traj, model, f)?;
    let rows: Vec<DefectRow> = catalog
        .par_iter()
        .map(|psi| {
            prepared.defect(psi).map(|defect| DefectRow {
                psi_id: psi.id().to_string(),
                defect,
            })
        })
        .collect::<Result<_>>()?;
    let max_defect = rows.iter().fold(0.0f64, |m, r| m.max(r.defect));
    Ok(DefectSweep { rows, max_defect })
}

/// Rows `psi_id,k_or_resolution,defect`, one block per labelled sweep.
pub fn write_residual_csv<W: Write>(sweeps: &[(String, DefectSweep)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["psi_id", "k_or_resolution", "defect"])?;
    for (label, sweep) in sweeps {
        for row in &sweep.rows {
            w.write_record([row.psi_id.as_str(), label.as_str(), &row.defect.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
