//! Scenario configuration, the shipped scenario catalog and the
//! boundary-layer program.
//!
//! Config files are `key = value` lines; `#` starts a comment.
//!
//! ```text
//! initial = atoms [(0.25, 0.5), (0.75, 0.5)]   # or: density uniform 16 [mass]
//! velocity = kernel linear -1                   # or any function spec
//! gating = constant 0                           # or: boundary_layer 8
//! horizon = 1
//! k_max = 6
//! ```

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::bl::{boundary_layer_family, split_head, parse_numbers, parse_point_list, GatingFunction};
use crate::error::{Error, Result};
use crate::euler::{
    convergence_rows, dyadic_euler_levels, richardson_extrapolate, ConvergenceRow, Partition, VelocityModel,
};
use crate::flat::sup_flat_distance;
use crate::flow::IntegratorConfig;
use crate::measure::ParticleMeasure;
use crate::weak::{defect_sweep, test_function_catalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// Constant density on [0, 1].
    Uniform,
    /// Density proportional to `x`.
    RampUp,
    /// Density proportional to `1 - x`.
    RampDown,
}

impl Density {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(Density::Uniform),
            "ramp_up" => Some(Density::RampUp),
            "ramp_down" => Some(Density::RampDown),
            _ => None,
        }
    }

    /// Inverse of the normalized distribution function.
    fn quantile(self, u: f64) -> f64 {
        match self {
            Density::Uniform => u,
            Density::RampUp => u.sqrt(),
            Density::RampDown => 1.0 - (1.0 - u).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    Atoms(Vec<(f64, f64)>),
    Density { density: Density, atoms: usize, mass: f64 },
}

impl InitialSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |msg: String| Error::bad_spec(format!("initial `{spec}`"), msg);
        let (head, rest) = split_head(spec);
        match head {
            "atoms" => Ok(InitialSpec::Atoms(parse_point_list(rest).map_err(bad)?)),
            "density" => {
                let (name, rest) = split_head(rest);
                let density = Density::parse(name).ok_or_else(|| bad(format!("unknown density `{name}`")))?;
                let nums = parse_numbers(rest).map_err(bad)?;
                let (count, mass) = match nums[..] {
                    [n] => (n, 1.0),
                    [n, m] => (n, m),
                    _ => return Err(bad("expected `density <name> <atoms> [mass]`".into())),
                };
                if !(count >= 1.0 && count.fract() == 0.0 && count <= 1e7) {
                    return Err(bad(format!("atom count must be a positive integer, got {count}")));
                }
                if !mass.is_finite() {
                    return Err(bad("mass must be finite".into()));
                }
                Ok(InitialSpec::Density {
                    density,
                    atoms: count as usize,
                    mass,
                })
            }
            other => Err(bad(format!("unknown initial kind `{other}`"))),
        }
    }
}

/// Turn an initial-measure spec into atoms. Densities become `N` atoms at the
/// quantile midpoints `F^{-1}((j + 1/2) / N)` with equal weights; the last
/// weight absorbs rounding so the total mass is exact.
pub fn ingest_initial_measure(spec: &InitialSpec) -> Result<ParticleMeasure> {
    match spec {
        InitialSpec::Atoms(pairs) => ParticleMeasure::new(pairs.iter().copied())
            .map_err(|e| Error::bad_spec("initial atoms", e.to_string())),
        InitialSpec::Density { density, atoms, mass } => {
            let n = *atoms;
            let w = mass / n as f64;
            let mut pairs: Vec<(f64, f64)> = (0..n)
                .map(|j| (density.quantile((j as f64 + 0.5) / n as f64), w))
                .collect();
            let head: f64 = pairs[..n - 1].iter().map(|p| p.1).sum();
            pairs[n - 1].1 = mass - head;
            ParticleMeasure::new(pairs)
        }
    }
}

/// A fully resolved scenario; every omitted key takes the default shown in
/// [`ScenarioConfig::default`] and is recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub initial: InitialSpec,
    pub velocity: String,
    pub gating: String,
    pub horizon: f64,
    pub k_max: u32,
    pub substep: f64,
    pub max_mode: u32,
    pub oversample: usize,
    /// Explicit partition for `simulate`; dyadic level `k_max` when absent.
    pub partition: Option<Vec<f64>>,
    pub boundary_layer_ns: Vec<u32>,
    pub output: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            initial: InitialSpec::Atoms(vec![(0.5, 1.0)]),
            velocity: "constant 0".into(),
            gating: "constant 0".into(),
            horizon: 1.0,
            k_max: 6,
            substep: IntegratorConfig::DEFAULT_SUBSTEP,
            max_mode: 4,
            oversample: 1,
            partition: None,
            boundary_layer_ns: vec![4, 8, 16, 32],
            output: PathBuf::from("mtsim-out"),
        }
    }
}

fn parse_scalar(key: &str, value: &str) -> std::result::Result<f64, String> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("`{key}` expects a number, got `{}`", value.trim()))
}

fn parse_count(key: &str, value: &str) -> std::result::Result<u64, String> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("`{key}` expects a nonnegative integer, got `{}`", value.trim()))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen_initial = false;
        for (lineno, raw) in text.lines().enumerate() {
            let location = format!("config line {}", lineno + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::bad_spec(&location, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| Error::bad_spec(&location, msg);
            let nested = |e: Error| match e {
                Error::BadSpec { message, .. } => Error::bad_spec(&location, message),
                other => Error::bad_spec(&location, other.to_string()),
            };
            match key {
                "initial" => {
                    cfg.initial = InitialSpec::parse(value).map_err(nested)?;
                    seen_initial = true;
                }
                "velocity" => {
                    VelocityModel::parse(value).map_err(nested)?;
                    cfg.velocity = value.to_string();
                }
                "gating" => {
                    GatingFunction::parse(value).map_err(nested)?;
                    cfg.gating = value.to_string();
                }
                "horizon" => cfg.horizon = parse_scalar(key, value).map_err(bad)?,
                "k_max" => cfg.k_max = parse_count(key, value).map_err(bad)?.min(u32::MAX as u64) as u32,
                "substep" => cfg.substep = parse_scalar(key, value).map_err(bad)?,
                "max_mode" => cfg.max_mode = parse_count(key, value).map_err(bad)?.min(u32::MAX as u64) as u32,
                "oversample" => cfg.oversample = parse_count(key, value).map_err(bad)? as usize,
                "partition" => {
                    let times = parse_numbers(value).map_err(bad)?;
                    Partition::new(times.clone()).map_err(nested)?;
                    cfg.partition = Some(times);
                }
                "boundary_layer_ns" => {
                    cfg.boundary_layer_ns = value
                        .split(',')
                        .map(|s| parse_count(key, s).map(|n| n as u32))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(bad)?;
                }
                "output" => cfg.output = PathBuf::from(value),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if !seen_initial {
            return Err(Error::bad_spec("config", "missing required key `initial`"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::bad_spec("config", msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(1..=20).contains(&self.k_max) {
            return bad(format!("k_max must be in 1..=20, got {}", self.k_max));
        }
        if self.oversample == 0 {
            return bad("oversample must be >= 1".into());
        }
        if self.boundary_layer_ns.contains(&0) {
            return bad("boundary_layer_ns entries must be positive".into());
        }
        if let Some(times) = &self.partition {
            if (times[times.len() - 1] - self.horizon).abs() > 0.0 {
                return bad("partition must end at the horizon".into());
            }
        }
        self.integrator().map_err(|e| Error::bad_spec("config", e.to_string()))?;
        self.initial_measure()?;
        Ok(())
    }

    pub fn initial_measure(&self) -> Result<ParticleMeasure> {
        ingest_initial_measure(&self.initial)
    }

    pub fn velocity_model(&self) -> Result<VelocityModel> {
        VelocityModel::parse(&self.velocity)
    }

    pub fn gating_function(&self) -> Result<GatingFunction> {
        GatingFunction::parse(&self.gating)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        IntegratorConfig::with_substep(self.substep)
    }

    /// The partition used by `simulate`.
    pub fn simulation_partition(&self) -> Result<Partition> {
        match &self.partition {
            Some(times) => Partition::new(times.clone()),
            None => Partition::uniform(self.horizon, 1usize << self.k_max),
        }
    }
}

const SHIPPED: &[(&str, &str)] = &[
    (
        "stopped_transport",
        "initial = atoms [(0.3, 1)]\nvelocity = constant 1\ngating = constant 0\nhorizon = 1\nk_max = 6\n",
    ),
    (
        "linear_kernel",
        "initial = atoms [(0.25, 0.5), (0.75, 0.5)]\nvelocity = kernel linear -1\ngating = constant 0\nhorizon = 1\nk_max = 8\n",
    ),
    (
        "gaussian_kernel",
        "initial = density ramp_up 12\nvelocity = kernel gaussian 2 0.3\ngating = affine -0.5 1\nhorizon = 1\nk_max = 7\n",
    ),
    (
        "ramped_sink",
        "initial = atoms [(0.5, 1)]\nvelocity = constant 1\n\
         gating = piecewise_linear [(0, 0), (0.799999, 0), (0.8, -1), (1, -1)]\nhorizon = 1\nk_max = 6\n",
    ),
    (
        "boundary_layer",
        "initial = density uniform 8\nvelocity = affine 0.6 -0.4\ngating = boundary_layer 8\nhorizon = 2\nk_max = 6\n\
         boundary_layer_ns = 4, 8, 16, 32\n",
    ),
];

/// Names of the shipped scenarios.
pub fn shipped_scenario_names() -> Vec<&'static str> {
    SHIPPED.iter().map(|s| s.0).collect()
}

/// Config text of a shipped scenario.
pub fn shipped_scenario_text(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|s| s.0 == name).map(|s| s.1)
}

pub fn shipped_scenario(name: &str) -> Result<ScenarioConfig> {
    let text = shipped_scenario_text(name).ok_or_else(|| {
        Error::bad_spec(
            "scenario",
            format!("unknown scenario `{name}` (known: {})", shipped_scenario_names().join(", ")),
        )
    })?;
    ScenarioConfig::parse(text)
}

pub fn shipped_scenarios() -> Vec<(&'static str, ScenarioConfig)> {
    SHIPPED
        .iter()
        .map(|(name, text)| (*name, ScenarioConfig::parse(text).expect("shipped scenarios parse")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLayerRow {
    pub n: u32,
    /// End-time total mass at dyadic levels `k = 1..=k_max`.
    pub end_mass: Vec<f64>,
    /// First-order Richardson estimate from the two finest levels.
    pub extrapolated_end_mass: f64,
    pub convergence: Vec<ConvergenceRow>,
    /// Largest catalog defect at the finest level, divided by `||nu0||_TV`.
    pub max_defect: f64,
    /// Sup-flat gap between the finest runs for this `n` and the next listed `n`.
    pub gap_to_next: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLayerReport {
    pub exploratory: bool,
    pub note: String,
    pub rows: Vec<BoundaryLayerRow>,
}

/// For each `n` in `cfg.boundary_layer_ns`, solve with the boundary-layer
/// gating `f_n` on dyadic partitions and tabulate masses, Cauchy gaps,
/// defects, and the gap to the next `n`. The numbers are measurements only;
/// nothing here asserts that the `n -> infinity` limit exists.
pub fn run_boundary_layer_program(cfg: &ScenarioConfig) -> Result<BoundaryLayerReport> {
    let mut ns = cfg.boundary_layer_ns.clone();
    if ns.is_empty() {
        return Err(Error::bad_spec("config", "boundary_layer_ns is empty"));
    }
    ns.sort_unstable();
    ns.dedup();
    if cfg.k_max < 2 {
        return Err(Error::bad_spec("config", "the boundary-layer program needs k_max >= 2"));
    }
    let nu0 = cfg.initial_measure()?;
    let model = cfg.velocity_model()?;
    let integ = cfg.integrator()?;
    let catalog = test_function_catalog(cfg.horizon, cfg.max_mode)?;
    let tv0 = nu0.tv_norm();

    let runs: Vec<_> = ns
        .par_iter()
        .map(|&n| -> Result<_> {
            let f = boundary_layer_family(n)?;
            let levels = dyadic_euler_levels(&nu0, &model, &f, cfg.horizon, cfg.k_max, cfg.oversample, &integ)?;
            let convergence = convergence_rows(&levels)?;
            let finest = levels.last().unwrap().clone();
            let sweep = defect_sweep(&finest, &model, &f, &catalog)?;
            let end_mass: Vec<f64> = levels.iter().map(|t| t.last_slice().total_mass()).collect();
            let k = end_mass.len();
            Ok((n, end_mass[k - 1], end_mass, convergence, sweep.max_defect, finest))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(runs.len());
    for (i, (n, _, end_mass, convergence, max_defect, finest)) in runs.iter().enumerate() {
        let gap_to_next = match runs.get(i + 1) {
            Some(next) => Some(sup_flat_distance(finest, &next.5)?),
            None => None,
        };
        let k = end_mass.len();
        rows.push(BoundaryLayerRow {
            n: *n,
            end_mass: end_mass.clone(),
            extrapolated_end_mass: richardson_extrapolate(end_mass[k - 2], end_mass[k - 1]),
            convergence: convergence.clone(),
            max_defect: if tv0 > 0.0 { max_defect / tv0 } else { *max_defect },
            gap_to_next,
        });
    }
    Ok(BoundaryLayerReport {
        exploratory: true,
        note: "exploratory measurement of gaps between boundary-layer solutions; \
               no convergence in n is claimed"
            .into(),
        rows,
    })
}
