use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_openaqc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn bundle(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("openaqc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn complex_list(v: &Value) -> Vec<(f64, f64)> {
    v.as_array().unwrap().iter().map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap())).collect()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn spectrum_reports_dephasing_rate() {
    let b = bundle(&["spectrum", "--model", "dj", "--lambda", "0.1"]);
    assert_eq!(b["command"], "spectrum");
    for p in b["outputs"]["points"].as_array().unwrap() {
        let eig = complex_list(&p["eigenvalues"]);
        assert_eq!(eig.len(), 4);
        assert!(eig.iter().any(|&(re, im)| (re + 0.02).abs() < 1e-10 && im.abs() < 1e-10), "{eig:?}");
        assert_eq!(p["all_one_dimensional"], true);
    }
}

#[test]
fn closed_system_spectrum_is_energy_differences() {
    let b = bundle(&["spectrum", "--lambda", "0", "--s", "0.3"]);
    let mut eig = complex_list(&b["outputs"]["points"][0]["eigenvalues"]);
    eig.sort_by(|a, b| a.1.total_cmp(&b.1));
    let want = [(0.0, -1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 1.0)];
    for (g, w) in eig.iter().zip(want) {
        assert!((g.0 - w.0).abs() < 1e-10 && (g.1 - w.1).abs() < 1e-10, "{eig:?}");
    }
}

#[test]
fn malformed_config_fails_without_output() {
    let cfg = scratch("bad.toml");
    std::fs::write(&cfg, "[model]\nlambda = [0.1\n").unwrap();
    let out_path = scratch("bad-out.json");
    let _ = std::fs::remove_file(&out_path);
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out_path.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_config_keys_name_the_key() {
    let cfg = scratch("unknown.toml");
    std::fs::write(&cfg, "[run]\nstepz = 10\n").unwrap();
    let out = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
}

#[test]
fn single_run_time_gives_one_crossover_row() {
    let csv = ok(&["crossover", "--lambda", "0.1", "--T", "11", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "T,T2c,T3c,T4c,window_flag");
    let row: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 11.0);
    assert!((0.70..=0.95).contains(&row[1]), "{row:?}");
    assert!((1.22..=1.65).contains(&row[2]), "{row:?}");
    assert!((row[2] - row[3]).abs() <= 1e-6 * row[2]);
}

#[test]
fn descending_run_time_grid_is_a_config_error() {
    assert_eq!(run(&["crossover", "--T-grid", "10:1:3"]).status.code(), Some(2));
}

#[test]
fn dephased_evolution_reaches_ninety_percent() {
    let b = bundle(&["evolve", "--lambda", "0.1", "--T", "11"]);
    let o = &b["outputs"];
    assert!((f(&o["p_success"]) - 0.9).abs() < 5e-3, "{}", o["p_success"]);
    assert!((f(&o["adiabatic"]["p_success"]) - f(&o["analytic"]["p_success"])).abs() < 1e-6);
    assert!(f(&o["analytic"]["trace_distance_adiabatic"]) < 1e-6);
    assert!((f(&o["exact"]["p_plus"]) + f(&o["exact"]["p_minus"]) - 1.0).abs() < 1e-12);
    let phys = &o["physicality"];
    assert!(f(&phys["max_trace_error"]) < 1e-10);
    assert!(f(&phys["max_hermiticity_error"]) < 1e-10);
    assert!(f(&phys["min_eigenvalue"]) > -1e-8);
}

#[test]
fn closed_system_evolution_succeeds() {
    let b = bundle(&["evolve", "--lambda", "0", "--T", "100"]);
    let o = &b["outputs"];
    assert!((f(&o["p_success"]) - 1.0).abs() < 1e-6, "{}", o["p_success"]);
    assert!((f(&o["physicality"]["min_purity"]) - 1.0).abs() < 1e-8);
    assert!((f(&o["physicality"]["max_purity"]) - 1.0).abs() < 1e-8);
}

#[test]
fn step_doubling_shrinks_integrator_error() {
    let base = bundle(&["evolve", "--lambda", "0.2", "--T", "5", "--steps", "200"]);
    let doubled = bundle(&["evolve", "--lambda", "0.2", "--T", "5", "--steps", "200", "--step-doubling"]);
    let ratio = f(&base["outputs"]["integrator_error"]) / f(&doubled["outputs"]["integrator_error"]);
    assert!(ratio >= 3.5, "ratio {ratio}");
    assert_eq!(doubled["provenance"]["grids"]["integrator_steps"], 400);
}

#[test]
fn optimal_run_time() {
    let b = bundle(&["optimal", "--lambda", "0.1", "--target", "0.9"]);
    assert!((f(&b["outputs"]["T_star"]) - 11.16).abs() < 0.01);
    let hard = bundle(&["optimal", "--lambda", "0.1", "--target", "0.999"]);
    assert_ne!(hard["outputs"]["verdict"], "comfortable");
    let free = bundle(&["optimal", "--lambda", "0", "--target", "0.9"]);
    assert_eq!(free["outputs"]["verdict"], "unbounded");
    assert!(free["outputs"]["T_star"].is_null());
    for t in ["0.5", "1", "0.2"] {
        assert_eq!(run(&["optimal", "--target", t]).status.code(), Some(2), "target {t}");
    }
}

#[test]
fn constant_spectrum_checks() {
    for args in [vec![], vec!["--lambda", "0"], vec!["--n-qubits", "2"], vec!["--lambda", "0", "--emission", "0.2"]] {
        let mut a = vec!["check-theorem1"];
        a.extend(args.iter().copied());
        let b = bundle(&a);
        assert_eq!(b["outputs"]["verdict"], "pass", "{args:?}");
        assert!(f(&b["outputs"]["max_drift"]) < 1e-10);
    }
    let b = bundle(&["check-theorem1", "--perturbation", "0.3"]);
    assert_eq!(b["outputs"]["verdict"], "fail");
    assert!(f(&b["outputs"]["max_drift"]) > 1e-3);
    assert_eq!(b["outputs"]["constant_spectrum"], false);
}

#[test]
fn custom_models_from_pauli_sums() {
    let b = bundle(&["check-theorem1", "--model", "custom", "--n-qubits", "1", "--h0", "-X", "--generator", "Z", "--lindblad", "0.2*Z"]);
    assert_eq!(b["outputs"]["verdict"], "pass");
    let out = run(&["spectrum", "--model", "custom", "--h0", "X"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundles_are_deterministic() {
    let args = ["sweep", "--lambda", "0.1,0.3", "--T-grid", "1:20:4:log", "--grid", "401"];
    assert_eq!(ok(&args), ok(&args));
    let args = ["evolve", "--T", "3", "--steps", "100"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn wall_clock_only_with_timing() {
    let plain = bundle(&["optimal"]);
    assert!(plain.get("wall_clock_s").is_none());
    let timed = bundle(&["optimal", "--timing"]);
    assert!(f(&timed["wall_clock_s"]) >= 0.0);
}

#[test]
fn config_round_trips_and_flags_override() {
    let cfg = scratch("run.toml");
    std::fs::write(&cfg, "# dephased run\n[model]\nlambda = [0.3]\n\n[run]\nT = 11.0\nsteps = 500\n").unwrap();
    let canonical = ok(&["config", "--config", cfg.to_str().unwrap()]);
    let again_path = scratch("canonical.toml");
    std::fs::write(&again_path, &canonical).unwrap();
    assert_eq!(ok(&["config", "--config", again_path.to_str().unwrap()]), canonical);
    let b = bundle(&["evolve", "--config", cfg.to_str().unwrap(), "--lambda", "0.1", "--steps", "300"]);
    assert_eq!(b["inputs"]["model"]["lambda"][0], 0.1);
    assert_eq!(b["inputs"]["run"]["steps"], 300);
    assert_eq!(b["inputs"]["run"]["T"], 11.0);
}

#[test]
fn output_file_matches_stdout() {
    let path = scratch("spectrum.csv");
    let stdout = ok(&["spectrum", "--format", "csv"]);
    assert!(ok(&["spectrum", "--format", "csv", "--out", path.to_str().unwrap()]).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout);
    assert_eq!(stdout.lines().next(), Some("s,block,re,im,dim,cluster"));
}

#[test]
fn sweep_csv_has_one_row_per_point() {
    let csv = ok(&["sweep", "--lambda", "0.1,0.3", "--T-grid", "1:20:3:log", "--grid", "401", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,T,T2c,T3c,T4c,window_flag");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.1,1,") && lines[4].starts_with("0.3,1,"));
}

#[test]
fn bundles_validate_against_schema() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/result_bundle.schema.json")).expect("schema parses");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let runs: [&[&str]; 7] = [
        &["spectrum"],
        &["crossover", "--T-grid", "1:20:3:log", "--grid", "401"],
        &["sweep", "--lambda", "0.1,0.3", "--T", "5", "--grid", "401"],
        &["evolve", "--T", "3", "--steps", "100", "--grid", "201"],
        &["optimal"],
        &["optimal", "--lambda", "0", "--timing"],
        &["check-theorem1", "--perturbation", "0.3", "--grid", "21"],
    ];
    for args in runs {
        let b = bundle(args);
        let errors: Vec<String> = validator.iter_errors(&b).map(|e| format!("{e} at {}", e.instance_path())).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
    }
    let mut broken = bundle(&["optimal"]);
    broken["command"] = Value::from("plot");
    assert!(!validator.is_valid(&broken));
}
