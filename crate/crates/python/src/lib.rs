//! Python bindings for the measure-transport solvers.
//!
//! Velocities, gating functions and velocity models are passed as config
//! strings in the same grammar the `mtsim` scenario files use.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use measure_transport as mt;

fn to_py(e: mt::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn integrator(substep: f64) -> PyResult<mt::IntegratorConfig> {
    mt::IntegratorConfig::with_substep(substep).map_err(to_py)
}

fn velocity(spec: &str) -> PyResult<mt::BLFunction> {
    mt::BLFunction::parse(spec).map_err(to_py)
}

fn gating(spec: &str) -> PyResult<mt::GatingFunction> {
    mt::GatingFunction::parse(spec).map_err(to_py)
}

fn model(spec: &str) -> PyResult<mt::VelocityModel> {
    mt::VelocityModel::parse(spec).map_err(to_py)
}

/// Finite signed combination of Dirac masses on [0, 1].
#[pyclass(name = "ParticleMeasure", frozen)]
struct PyMeasure {
    inner: mt::ParticleMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: mt::ParticleMeasure::new(atoms).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn dirac(position: f64, weight: f64) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: mt::ParticleMeasure::dirac(position, weight).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: mt::ParticleMeasure::from_json(text).map_err(to_py)?,
        })
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.to_pairs()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn first_moment(&self) -> f64 {
        self.inner.first_moment()
    }

    fn tv_norm(&self) -> f64 {
        self.inner.tv_norm()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// `a * self + b * other`.
    fn combine(&self, a: f64, other: &PyMeasure, b: f64) -> PyMeasure {
        PyMeasure {
            inner: mt::measure::linear_combine(a, &self.inner, b, &other.inner),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ParticleMeasure({:?})", self.inner.to_pairs())
    }
}

/// Time slices of an atomic solution.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: mt::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn slice(&self, i: usize) -> PyResult<PyMeasure> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "slice {i} out of range for {} slices",
                self.inner.len()
            )));
        }
        Ok(PyMeasure {
            inner: self.inner.slice(i),
        })
    }

    fn last_slice(&self) -> PyMeasure {
        PyMeasure {
            inner: self.inner.last_slice(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({} slices, {} atoms, T = {})",
            self.inner.len(),
            self.inner.atom_count(),
            self.inner.end_time()
        )
    }
}

/// Flat (bounded-Lipschitz dual) norm of a signed measure.
#[pyfunction]
fn flat_norm(measure: &PyMeasure) -> PyResult<f64> {
    Ok(mt::flat_norm(&measure.inner).map_err(to_py)?.value)
}

/// Flat norm together with the optimal test function, as a dict.
#[pyfunction]
fn flat_norm_certificate<'py>(py: Python<'py>, measure: &PyMeasure) -> PyResult<Bound<'py, PyDict>> {
    let cert = mt::flat_norm(&measure.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("value", cert.value)?;
    d.set_item("positions", cert.positions)?;
    d.set_item("weights", cert.weights)?;
    d.set_item("optimal_phi", cert.optimal_phi)?;
    d.set_item("sup_part", cert.sup_part)?;
    d.set_item("lip_part", cert.lip_part)?;
    Ok(d)
}

#[pyfunction]
fn flat_distance(first: &PyMeasure, second: &PyMeasure) -> PyResult<f64> {
    mt::flat_distance(&first.inner, &second.inner).map_err(to_py)
}

/// Stopped flow of `x0` for time `t`: `(position, stopped, hit_time)`.
#[pyfunction]
#[pyo3(signature = (x0, t, velocity, substep = 1e-3))]
fn flow_map(x0: f64, t: f64, velocity: &str, substep: f64) -> PyResult<(f64, bool, Option<f64>)> {
    let r = mt::flow_map(x0, t, &self::velocity(velocity)?, &integrator(substep)?).map_err(to_py)?;
    Ok((r.position, r.stopped, r.hit_time))
}

/// Mild solution for a fixed velocity field.
#[pyfunction]
#[pyo3(signature = (measure, velocity, gating, horizon, sample_times = Vec::new(), substep = 1e-3))]
fn mild_solve(
    measure: &PyMeasure,
    velocity: &str,
    gating: &str,
    horizon: f64,
    sample_times: Vec<f64>,
    substep: f64,
) -> PyResult<PyTrajectory> {
    let inner = mt::mild_solve(
        &measure.inner,
        &self::velocity(velocity)?,
        &self::gating(gating)?,
        horizon,
        &sample_times,
        &integrator(substep)?,
    )
    .map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

/// Euler scheme on a uniform partition of `[0, horizon]` into `intervals` pieces.
#[pyfunction]
#[pyo3(signature = (measure, model, gating, horizon, intervals, oversample = 1, substep = 1e-3))]
fn euler_solve(
    measure: &PyMeasure,
    model: &str,
    gating: &str,
    horizon: f64,
    intervals: usize,
    oversample: usize,
    substep: f64,
) -> PyResult<PyTrajectory> {
    let alpha = mt::Partition::uniform(horizon, intervals).map_err(to_py)?;
    let inner = mt::euler_solve_sampled(
        &measure.inner,
        &self::model(model)?,
        &self::gating(gating)?,
        &alpha,
        oversample,
        &integrator(substep)?,
    )
    .map_err(to_py)?;
    Ok(PyTrajectory { inner })
}

type Row = (u32, usize, f64, f64, Option<f64>);

/// Sup-flat gaps between dyadic Euler levels: rows `(k, N_k, mesh, gap, ratio)`.
#[pyfunction]
#[pyo3(signature = (measure, model, gating, horizon, k_max, substep = 1e-3))]
fn convergence_table(
    measure: &PyMeasure,
    model: &str,
    gating: &str,
    horizon: f64,
    k_max: u32,
    substep: f64,
) -> PyResult<Vec<Row>> {
    let rows = mt::convergence_table(
        &measure.inner,
        &self::model(model)?,
        &self::gating(gating)?,
        horizon,
        k_max,
        &integrator(substep)?,
    )
    .map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.k, r.intervals, r.mesh, r.sup_flat_gap, r.ratio))
        .collect())
}

/// Weak-form defects of a trajectory over the test-function catalog.
#[pyfunction]
#[pyo3(signature = (trajectory, model, gating, max_mode = 4))]
fn defect_sweep(trajectory: &PyTrajectory, model: &str, gating: &str, max_mode: u32) -> PyResult<Vec<(String, f64)>> {
    let catalog = mt::test_function_catalog(trajectory.inner.end_time(), max_mode).map_err(to_py)?;
    let sweep = mt::defect_sweep(&trajectory.inner, &self::model(model)?, &self::gating(gating)?, &catalog)
        .map_err(to_py)?;
    Ok(sweep.rows.into_iter().map(|r| (r.psi_id, r.defect)).collect())
}

/// Run the `mtsim` command line with `args` (without the program name).
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    mt::cli::cli_dispatch(std::iter::once("mtsim".to_string()).chain(args))
}

#[pymodule]
fn measure_transport_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(flat_norm, m)?)?;
    m.add_function(wrap_pyfunction!(flat_norm_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(flat_distance, m)?)?;
    m.add_function(wrap_pyfunction!(flow_map, m)?)?;
    m.add_function(wrap_pyfunction!(mild_solve, m)?)?;
    m.add_function(wrap_pyfunction!(euler_solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_table, m)?)?;
    m.add_function(wrap_pyfunction!(defect_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
