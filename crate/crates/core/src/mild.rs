//! Solution operator for a fixed velocity field.
//!
//! For atomic initial data the variation-of-constants solution is again
//! atomic: atom `i` is transported by the stopped flow and its weight obeys
//! `w_i' = f(x_i(t)) w_i`, so
//!
//! ```text
//! x_i(t) = Phi_t(x_i(0)),    w_i(t) = w_i(0) * exp( int_0^t f(Phi_s(x_i(0))) ds ).
//! ```
//!
//! Gating continues after an atom has stopped, with `f` evaluated at the
//! boundary point. No Picard iteration is needed.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bl::{validate_discontinuity_condition, BLFunction, GatingFunction};
use crate::error::{Error, Result};
use crate::flow::{integrate_characteristic, IntegratorConfig};
use crate::measure::ParticleMeasure;

/// Slack on the envelope `||mu_t||_TV <= ||mu_0||_TV exp(||f||_inf t)`.
pub const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub velocity: String,
    pub gating: String,
    pub scheme: String,
    pub substep: f64,
}

impl Provenance {
    pub fn new(velocity: impl Into<String>, gating: impl Into<String>, scheme: impl Into<String>, substep: f64) -> Self {
        Provenance {
            velocity: velocity.into(),
            gating: gating.into(),
            scheme: scheme.into(),
            substep,
        }
    }
}

/// Time-sampled measure-valued trajectory. Atom `i` in every slice is the
/// same particle; slices are never coalesced.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    positions: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl Trajectory {
    /// Assemble from per-slice `(position, weight)` lists indexed by atom identity.
    pub fn from_slices(times: Vec<f64>, slices: Vec<Vec<(f64, f64)>>, provenance: Provenance) -> Result<Self> {
        let positions = slices.iter().map(|s| s.iter().map(|p| p.0).collect()).collect();
        let weights = slices.iter().map(|s| s.iter().map(|p| p.1).collect()).collect();
        Self::from_parts(times, positions, weights, provenance)
    }

    pub(crate) fn from_parts(
        times: Vec<f64>,
        positions: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::InvalidParameter("trajectory times must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("trajectory times must be strictly increasing".into()));
        }
        if positions.len() != times.len() || weights.len() != times.len() {
            return Err(Error::InvalidParameter("one slice per sample time is required".into()));
        }
        let n = positions[0].len();
        for (p, w) in positions.iter().zip(&weights) {
            if p.len() != n || w.len() != n {
                return Err(Error::InvalidParameter("all slices must have the same atom count".into()));
            }
            if let Some(&x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::PositionOutOfDomain(x));
            }
        }
        Ok(Trajectory {
            times,
            positions,
            weights,
            provenance,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.positions[0].len()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Positions of slice `i`, indexed by atom identity.
    pub fn positions(&self, i: usize) -> &[f64] {
        &self.positions[i]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// Slice `i` as a (sorted) measure.
    pub fn slice(&self, i: usize) -> ParticleMeasure {
        ParticleMeasure::new(self.positions[i].iter().copied().zip(self.weights[i].iter().copied()))
            .expect("trajectory slices lie in [0, 1]")
    }

    pub fn slices(&self) -> impl Iterator<Item = ParticleMeasure> + '_ {
        (0..self.len()).map(move |i| self.slice(i))
    }

    pub fn last_slice(&self) -> ParticleMeasure {
        self.slice(self.len() - 1)
    }

    /// Index of the slice at time `t`, if sampled there up to round-off
    /// (`1e-12` relative to the end time).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.end_time().max(1.0);
        let k = self.times.partition_point(|&s| s < t - tol);
        self.times.get(k).filter(|&&s| (s - t).abs() <= tol).map(|_| k)
    }

    /// Rows `time,atom_index,position,weight`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "atom_index", "position", "weight"])?;
        for (i, &t) in self.times.iter().enumerate() {
            for (a, (&x, &m)) in self.positions[i].iter().zip(&self.weights[i]).enumerate() {
                w.serialize((t, a, x, m))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `time,tv_norm,first_moment`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "tv_norm", "first_moment"])?;
        for (i, &t) in self.times.iter().enumerate() {
            let s = self.slice(i);
            w.serialize((t, s.tv_norm(), s.first_moment()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `F_f(mu) = f * mu`: weights become `w_i f(x_i)`.
pub fn apply_gating(mu: &ParticleMeasure, f: &GatingFunction) -> ParticleMeasure {
    mu.reweight(|x| f.eval(x))
}

/// Evolve atoms given in identity order through `times` (`times[0]` is the
/// start time) under fixed `v` and gating `f`. Returns positions and weights
/// per time.
/// Per-slice values, one row per sample time.
pub(crate) type Slices = Vec<Vec<f64>>;

pub(crate) fn evolve_atoms(
    positions: &[f64],
    weights: &[f64],
    v: &BLFunction,
    f: &GatingFunction,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Slices, Slices)> {
    let per_atom: Vec<Vec<(f64, f64)>> = positions
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&x0, &w0)| {
            integrate_characteristic(x0, v, Some(f), times, cfg)
                .map(|states| states.iter().map(|s| (s.x, w0 * s.log_gain.exp())).collect())
        })
        .collect::<Result<_>>()?;
    let mut xs = vec![Vec::with_capacity(positions.len()); times.len()];
    let mut ws = vec![Vec::with_capacity(positions.len()); times.len()];
    for atom in &per_atom {
        for (k, &(x, w)) in atom.iter().enumerate() {
            xs[k].push(x);
            ws[k].push(w);
        }
    }
    Ok((xs, ws))
}

/// Sorted, de-duplicated sample grid `{0} ∪ sample_times ∪ {horizon}`.
pub(crate) fn sample_grid(horizon: f64, sample_times: &[f64]) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if let Some(&t) = sample_times.iter().find(|t| !(0.0..=horizon).contains(*t)) {
        return Err(Error::InvalidParameter(format!("sample time {t} outside [0, {horizon}]")));
    }
    let mut times: Vec<f64> = std::iter::once(0.0)
        .chain(sample_times.iter().copied())
        .chain(std::iter::once(horizon))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

/// Mild solution `Q_t nu0` for fixed `v` and gating `f`, sampled at
/// `{0} ∪ sample_times ∪ {horizon}`.
pub fn mild_solve(
    nu0: &ParticleMeasure,
    v: &BLFunction,
    f: &GatingFunction,
    horizon: f64,
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let times = sample_grid(horizon, sample_times)?;
    let parked = validate_discontinuity_condition(f, v);
    if !parked.is_empty() {
        log::warn!(
            "gating jumps at {parked:?} where the velocity vanishes; evaluating the gating from the right there"
        );
    }
    let x0: Vec<f64> = nu0.positions().collect();
    let w0: Vec<f64> = nu0.weights().collect();
    let (xs, ws) = evolve_atoms(&x0, &w0, v, f, &times, cfg)?;
    Trajectory::from_parts(
        times,
        xs,
        ws,
        Provenance::new(v.to_string(), f.to_string(), "mild", cfg.substep()),
    )
}

/// Slices violating `||mu_t||_TV <= ||mu_0||_TV exp(||f||_inf t) (1 + 1e-9)`,
/// as `(time, tv_norm, bound)`.
pub fn tv_envelope_violations(traj: &Trajectory, f: &GatingFunction) -> Vec<(f64, f64, f64)> {
    let tv0 = traj.slice(0).tv_norm();
    let rate = f.sup_norm();
    traj.times()
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let tv = traj.slice(i).tv_norm();
            let bound = tv0 * (rate * t).exp() * (1.0 + ENVELOPE_SLACK);
            (tv > bound).then_some((t, tv, bound))
        })
        .collect()
}

pub fn tv_envelope(traj: &Trajectory, f: &GatingFunction) -> bool {
    tv_envelope_violations(traj, f).is_empty()
}
