use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn atomsim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomsim"))
        .args(args)
        .env_clear()
        .envs(envs.iter().copied())
        .output()
        .unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full = args.to_vec();
    let out = dir.to_str().unwrap();
    full.extend(["--out", out]);
    atomsim(&full, &[])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn help_and_version_exit_cleanly() {
    let h = atomsim(&["--help"], &[]);
    assert_eq!(h.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&h.stdout).contains("simulate"));
    let v = atomsim(&["--version"], &[]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_required_value_is_a_usage_error_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = run_in(&out, &["simulate", "--p0", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_error(&o);
    assert_eq!(err["error"]["kind"], "usage");
    assert!(err["error"]["message"].as_str().unwrap().contains("--delta"));
    assert!(!out.exists());

    assert_eq!(atomsim(&["simulate", "--no-such-flag"], &[]).status.code(), Some(2));
    assert_eq!(atomsim(&["simulate", "--delta", "abc"], &[]).status.code(), Some(2));
    assert_eq!(run_in(&out, &["simulate", "--delta", "0.2", "--p0", "10", "--tol", "2"]).status.code(), Some(2));
}

#[test]
fn invariant_drift_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["simulate", "--delta", "0.2", "--p0", "10", "--tau", "500", "--tol", "1e-3", "--drift-abort", "1e-12"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_error(&o)["error"]["kind"], "numerical");
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["simulate", "--paper-fig2", "cw", "--tau", "50", "--deterministic", "--gnuplot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("tau,x,p,g1,g2,G1,G2,H,norm,u"));
    assert_eq!(traj.lines().count(), 1 + 501);
    assert!(dir.path().join("trajectory.gp").exists());

    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["command"], "simulate");
    assert!(m["wall_time_s"].is_null());
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["config"]["delta"], 0.2);
    assert_eq!(m["config"]["p0"], 10.0);
    assert_eq!(m["config"]["preset"], "fig2-cw");
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["trajectory.csv", "trajectory.gp"]);
}

#[test]
fn flag_beats_environment_beats_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test\ndelta = 0.5\np0 = 7\ntau = 5\nomega-r = 2e-3\n").unwrap();
    let out = dir.path().join("a");
    let o = atomsim(
        &["simulate", "--config", cfg.to_str().unwrap(), "--delta", "0.1", "--out", out.to_str().unwrap()],
        &[("ATOMSIM_P0", "9")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = &json(&out.join("manifest.json"))["config"];
    assert_eq!(c["delta"], 0.1);
    assert_eq!(c["p0"], 9.0);
    assert_eq!(c["tau"], 5.0);
    assert_eq!(c["omega_r"], 2e-3);

    fs::write(&cfg, "delta = 0.5\np0 = 7\nfrobnicate = 1\n").unwrap();
    let o = atomsim(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_error(&o)["error"]["message"].as_str().unwrap().contains("frobnicate"));
}

#[test]
fn deterministic_runs_are_bitwise_identical() {
    let dir = TempDir::new().unwrap();
    let args = ["ensemble", "--delta", "0.2", "--n-atoms", "16", "--tau", "100", "--seed", "11", "--deterministic"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_in(&a, &args).status.code(), Some(0));
    assert_eq!(run_in(&b, &args).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn convert_lithium_beam() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["convert", "--wavelength", "670.7e-9", "--rabi", "126e6", "--radius", "5e-4", "--sigma-tau", "400"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&dir.path().join("convert.json"));
    assert!((c["omega_r"].as_f64().unwrap() / 1e-3 - 1.0).abs() < 0.01);
    assert!((c["sigma_tau"].as_f64().unwrap() - 400.0).abs() < 1e-9);
    assert!((c["longitudinal_velocity_m_s"].as_f64().unwrap() / 990.0 - 1.0).abs() < 0.01);

    let both = run_in(
        dir.path(),
        &["convert", "--wavelength", "670.7e-9", "--rabi", "126e6", "--radius", "5e-4"],
    );
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn classify_regime_examples() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["classify", "--paper-fig2", "--tau", "1e4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&dir.path().join("classification.json"));
    let labels: Vec<&str> = c["cases"].as_array().unwrap().iter().map(|v| v["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["RF", "CF", "CW", "T"]);
}

#[test]
fn small_map_with_gnuplot_output() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["map", "--delta", "-0.2:0.2:3", "--p0", "5:15:2", "--tau-total", "200", "--gnuplot", "--jobs", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    for f in ["map.json", "map.dat", "map.gp", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let side = json(&dir.path().join("map.json"));
    assert_eq!(side["missing_cells"], 0);
    assert_eq!(side["delta_axis"].as_array().unwrap().len(), 3);

    assert_eq!(run_in(dir.path(), &["map", "--delta", "0:1", "--p0", "5:15:2"]).status.code(), Some(2));
}

#[test]
fn ensemble_preset_writes_both_histograms() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["ensemble", "--paper-fig10b", "--n-atoms", "20", "--tau", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for tag in ["_delta0.2", "_delta1"] {
        let h = fs::read_to_string(dir.path().join(format!("histogram{tag}.csv"))).unwrap();
        assert_eq!(h.lines().count(), 1 + 48);
        let e = fs::read_to_string(dir.path().join(format!("ensemble{tag}.csv"))).unwrap();
        assert_eq!(e.lines().count(), 1 + 20);
    }
}

#[test]
fn lyap_reports_predictability_time() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["lyap", "--delta", "0.2", "--p0", "10", "--tau-total", "2000", "--dx0", "1e-6", "--dx-confidence", "1e-2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let l = json(&dir.path().join("lyapunov.json"));
    let lambda = l["lambda"].as_f64().unwrap();
    assert!(lambda > 0.0);
    let t = l["predictability_time"].as_f64().unwrap();
    assert!((t - 1e4f64.ln() / lambda).abs() < 1e-9 * t);
    assert!(dir.path().join("convergence.csv").exists());

    let o = run_in(dir.path(), &["lyap", "--delta", "0.2", "--p0", "10", "--dx0", "1e-6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quiet_suppresses_the_summary_only() {
    let dir = TempDir::new().unwrap();
    let loud = run_in(&dir.path().join("a"), &["simulate", "--delta", "0", "--p0", "10", "--tau", "5", "--deterministic"]);
    let quiet = run_in(&dir.path().join("b"), &["simulate", "--delta", "0", "--p0", "10", "--tau", "5", "--deterministic", "-q"]);
    assert!(serde_json::from_slice::<Value>(&loud.stdout).unwrap()["samples"].is_number());
    assert!(quiet.stdout.is_empty());
    let m = |d: &str| fs::read(dir.path().join(d).join("manifest.json")).unwrap();
    assert_eq!(m("a"), m("b"));
}
