//! Measure-valued transport on `[0, 1]` with stopped characteristics,
//! multiplicative gating, and measure-dependent velocities.
//!
//! Measures are finite signed combinations of Dirac atoms. The crate covers
//! the stopped flow, mild solutions for a fixed velocity, the Euler scheme
//! for `v[mu]`, the dual bounded-Lipschitz (flat) norm, weak-form defects,
//! and a scenario driver with CSV/JSON reporting.

// `!(a < b)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bl;
pub mod cli;
pub mod error;
pub mod euler;
pub mod flat;
pub mod flow;
pub mod measure;
pub mod mild;
pub mod scenario;
mod simplex;
pub mod weak;

pub use bl::{boundary_layer_family, BLFunction, GatingFamily, GatingFunction, TentRampLayers};
pub use error::{Error, Result};
pub use euler::{
    convergence_table, dyadic_refinements, euler_solve, euler_solve_sampled, freeze_velocity, ConvergenceRow, Kernel,
    Partition, VelocityBounds, VelocityModel,
};
pub use flat::{flat_distance, flat_norm, sup_flat_distance, FlatNormCertificate};
pub use flow::{flow_map, semigroup_defect, FlowResult, IntegratorConfig};
pub use measure::{Atom, CoalescePolicy, ParticleMeasure};
pub use mild::{apply_gating, mild_solve, tv_envelope, Trajectory};
pub use scenario::{ingest_initial_measure, run_boundary_layer_program, ScenarioConfig};
pub use weak::{defect_sweep, test_function_catalog, weak_defect, DefectSweep, TestFunction};
