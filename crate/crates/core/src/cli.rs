//! Command-line driver behind the `mtsim` binary.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::euler::{convergence_rows, dyadic_euler_levels, euler_solve_sampled, write_convergence_csv};
use crate::flat::flat_norm;
use crate::measure::{linear_combine, ParticleMeasure};
use crate::scenario::{run_boundary_layer_program, shipped_scenario, shipped_scenario_names, ScenarioConfig};
use crate::weak::{defect_sweep, test_function_catalog, write_residual_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mtsim", version, about = "Measure-valued transport on [0,1]: solvers and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Euler solve of a scenario; writes the trajectory CSV
    Simulate(ScenarioArgs),
    /// Sup-flat gaps between dyadic refinements; writes the convergence CSV
    Converge(ScenarioArgs),
    /// Weak-form defects per dyadic level; writes the residual CSV
    Residual(ScenarioArgs),
    /// Flat norm of the difference of two measure CSV files
    FlatMetric(FlatArgs),
    /// Exploratory boundary-layer program over the configured n values
    BoundaryLayer(ScenarioArgs),
    /// List the shipped scenarios
    Scenarios,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario config file
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Name of a shipped scenario
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory (overrides the config)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FlatArgs {
    /// First measure (CSV `position,weight`)
    first: PathBuf,
    /// Second measure (CSV `position,weight`)
    second: PathBuf,
    /// Print the full certificate as JSON
    #[arg(long)]
    json: bool,
    /// Directory for the manifest
    #[arg(long, default_value = "mtsim-out")]
    output: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, config: &C, outputs: &[&str]) -> Result<()> {
    let manifest = Manifest {
        tool: "mtsim",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn load_config(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::bad_spec(path.display().to_string(), e.to_string()))?;
            ScenarioConfig::parse(&text).map_err(|e| match e {
                Error::BadSpec { location, message } => {
                    Error::bad_spec(format!("{}: {location}", path.display()), message)
                }
                other => other,
            })?
        }
        (None, Some(name)) => shipped_scenario(name)?,
        (None, None) => return Err(Error::bad_spec("arguments", "either --config or --scenario is required")),
    };
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    fs::create_dir_all(&cfg.output)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    Ok(fs::File::create(dir.join(name))?)
}

fn simulate(args: &ScenarioArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args)?;
    let alpha = cfg.simulation_partition()?;
    let traj = euler_solve_sampled(
        &cfg.initial_measure()?,
        &cfg.velocity_model()?,
        &cfg.gating_function()?,
        &alpha,
        cfg.oversample,
        &cfg.integrator()?,
    )?;
    traj.write_csv(create(&cfg.output, "trajectory.csv")?)?;
    traj.write_summary_csv(create(&cfg.output, "summary.csv")?)?;
    write_manifest(&cfg.output, "simulate", &cfg, &["trajectory.csv", "summary.csv"])?;
    let end = traj.last_slice();
    writeln!(
        out,
        "simulated {} slices to T = {}; end mass {:.9}, tv {:.9}",
        traj.len(),
        traj.end_time(),
        end.total_mass(),
        end.tv_norm()
    )?;
    Ok(())
}

fn converge(args: &ScenarioArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args)?;
    if cfg.k_max < 2 {
        return Err(Error::bad_spec("config", "converge needs k_max >= 2"));
    }
    let levels = dyadic_euler_levels(
        &cfg.initial_measure()?,
        &cfg.velocity_model()?,
        &cfg.gating_function()?,
        cfg.horizon,
        cfg.k_max,
        cfg.oversample,
        &cfg.integrator()?,
    )?;
    let rows = convergence_rows(&levels)?;
    write_convergence_csv(&rows, create(&cfg.output, "convergence.csv")?)?;
    write_manifest(&cfg.output, "converge", &cfg, &["convergence.csv"])?;
    write_convergence_csv(&rows, &mut *out)?;
    Ok(())
}

fn residual(args: &ScenarioArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args)?;
    let nu0 = cfg.initial_measure()?;
    let model = cfg.velocity_model()?;
    let f = cfg.gating_function()?;
    let levels = dyadic_euler_levels(&nu0, &model, &f, cfg.horizon, cfg.k_max, cfg.oversample, &cfg.integrator()?)?;
    let catalog = test_function_catalog(cfg.horizon, cfg.max_mode)?;
    let mut sweeps = Vec::with_capacity(levels.len());
    for (i, traj) in levels.iter().enumerate() {
        if traj.len() < 3 {
            continue;
        }
        sweeps.push(((i + 1).to_string(), defect_sweep(traj, &model, &f, &catalog)?));
    }
    write_residual_csv(&sweeps, create(&cfg.output, "residual.csv")?)?;
    write_manifest(&cfg.output, "residual", &cfg, &["residual.csv"])?;
    let tv0 = nu0.tv_norm();
    writeln!(out, "k,max_defect,normalized")?;
    for (k, sweep) in &sweeps {
        let normalized = if tv0 > 0.0 { sweep.max_defect / tv0 } else { sweep.max_defect };
        writeln!(out, "{k},{},{normalized}", sweep.max_defect)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FlatInputs<'a> {
    first: &'a Path,
    second: &'a Path,
}

fn flat_metric(args: &FlatArgs, out: &mut dyn Write) -> Result<()> {
    let read = |p: &Path| {
        ParticleMeasure::from_csv_file(p).map_err(|e| match e {
            Error::Io(m) => Error::bad_spec(p.display().to_string(), m),
            Error::BadSpec { location, message } => Error::bad_spec(format!("{}: {location}", p.display()), message),
            other => other,
        })
    };
    let mu = read(&args.first)?;
    let nu = read(&args.second)?;
    let cert = flat_norm(&linear_combine(1.0, &mu, -1.0, &nu))?;
    fs::create_dir_all(&args.output)?;
    write_manifest(
        &args.output,
        "flat-metric",
        &FlatInputs {
            first: &args.first,
            second: &args.second,
        },
        &[],
    )?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&cert)?)?;
    } else {
        writeln!(out, "{:.6}", cert.value)?;
    }
    Ok(())
}

fn boundary_layer(args: &ScenarioArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(args)?;
    let report = run_boundary_layer_program(&cfg)?;
    fs::write(cfg.output.join("boundary_layer.json"), serde_json::to_string_pretty(&report)?)?;
    let mut w = csv::Writer::from_writer(create(&cfg.output, "boundary_layer.csv")?);
    w.write_record(["n", "finest_end_mass", "extrapolated_end_mass", "max_defect", "gap_to_next"])?;
    for r in &report.rows {
        w.write_record([
            r.n.to_string(),
            r.end_mass.last().copied().unwrap_or(f64::NAN).to_string(),
            r.extrapolated_end_mass.to_string(),
            r.max_defect.to_string(),
            r.gap_to_next.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    write_manifest(&cfg.output, "boundary-layer", &cfg, &["boundary_layer.json", "boundary_layer.csv"])?;
    writeln!(out, "# {}", report.note)?;
    writeln!(out, "n,extrapolated_end_mass,gap_to_next")?;
    for r in &report.rows {
        let gap = r.gap_to_next.map(|g| format!("{g:.6e}")).unwrap_or_else(|| "-".into());
        writeln!(out, "{},{:.9},{gap}", r.n, r.extrapolated_end_mass)?;
    }
    Ok(())
}

/// Parse `argv` (including the program name), run the command, and return
/// the process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn cli_dispatch_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Converge(a) => converge(a, out),
        Command::Residual(a) => residual(a, out),
        Command::FlatMetric(a) => flat_metric(a, out),
        Command::BoundaryLayer(a) => boundary_layer(a, out),
        Command::Scenarios => shipped_scenario_names()
            .into_iter()
            .try_for_each(|n| writeln!(out, "{n}").map_err(Error::from)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// [`cli_dispatch_with`] on stdout and stderr.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli_dispatch_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
