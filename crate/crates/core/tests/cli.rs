use std::fs;
use std::path::Path;

use measure_transport::cli::{cli_dispatch_with, EXIT_CONFIG, EXIT_OK};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mtsim").chain(args.iter().copied());
    let code = cli_dispatch_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flat_metric_of_two_diracs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "position,weight\n0,1\n").unwrap();
    fs::write(&b, "position,weight\n1,1\n").unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, err) = run(&["flat-metric", path_str(&a), path_str(&b), "--output", path_str(&out_dir)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.trim(), "0.666667");
    assert!(out_dir.join("manifest.json").exists());

    let (code, out, _) = run(&["flat-metric", path_str(&a), path_str(&b), "--json", "--output", path_str(&out_dir)]);
    assert_eq!(code, EXIT_OK);
    let cert: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((cert["value"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).0, EXIT_CONFIG);
    assert_eq!(run(&["converge"]).0, EXIT_CONFIG);
    assert_eq!(run(&["converge", "--scenario", "no_such_scenario"]).0, EXIT_CONFIG);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "initial = atoms [(0.5, 1)]\nvelocity = warp 9\n").unwrap();
    let (code, _, err) = run(&["simulate", "--config", path_str(&cfg), "--output", path_str(dir.path())]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("error"), "{err}");

    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["simulate", "--config", path_str(&missing)]).0, EXIT_CONFIG);
}

#[test]
fn converge_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "initial = density ramp_up 6\nvelocity = kernel gaussian 2 0.3\nk_max = 4\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, err) = run(&["converge", "--config", path_str(&cfg), "--output", path_str(&out_dir)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k,N_k,mesh,sup_flat_gap,ratio");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,2,0.5,") && lines[1].ends_with(','), "{out}");
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(csv, out);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "converge");
    assert_eq!(manifest["config"]["k_max"], 4);
}

#[test]
fn simulate_and_residual_on_shipped_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = path_str(dir.path());
    let (code, out, err) = run(&["simulate", "--scenario", "stopped_transport", "--output", out_dir]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("end mass"));
    let trajectory = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("time,atom_index,position,weight"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("time,tv_norm,first_moment"));

    let (code, _, err) = run(&["residual", "--scenario", "stopped_transport", "--output", out_dir]);
    assert_eq!(code, EXIT_OK, "{err}");
    let residual = fs::read_to_string(dir.path().join("residual.csv")).unwrap();
    assert!(residual.starts_with("psi_id,k_or_resolution,defect"));
}

#[test]
fn scenarios_are_listed() {
    let (code, out, _) = run(&["scenarios"]);
    assert_eq!(code, EXIT_OK);
    for name in ["stopped_transport", "linear_kernel", "gaussian_kernel", "ramped_sink", "boundary_layer"] {
        assert!(out.lines().any(|l| l == name), "{name} missing from {out}");
    }
}
