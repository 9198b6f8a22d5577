use std::time::Instant;

use atomsim::dynamics::{analytic, initial_regime_estimate, integrate, AtomState, IntegratorOptions, Trajectory};
use atomsim::io::{write_portrait_csv, write_trajectory_csv};
use atomsim::regimes::group_parameter_portrait;
use serde_json::{json, Value};

use super::{physics, report, start_run, Common};
use crate::args::SimulateArgs;
use crate::config::Resolver;
use crate::error::CliError;

const FIG3_COUNT: usize = 50;
const FIG3_P0_MAX: f64 = 50.0;
const FIG3_DELTA: f64 = 0.2;

fn parse_marks(text: &str, tau: f64) -> Result<Vec<f64>, CliError> {
    let mut marks = Vec::new();
    for part in text.split(',').filter(|s| !s.trim().is_empty()) {
        let m: f64 = part
            .trim()
            .parse()
            .map_err(|e| CliError::usage(format!("--portrait: `{part}`: {e}")))?;
        if !(m >= 0.0 && m <= tau) {
            return Err(CliError::usage(format!("--portrait: mark {m} outside [0, {tau}]")));
        }
        marks.push(m);
    }
    if marks.is_empty() {
        return Err(CliError::usage("--portrait: no time marks given"));
    }
    Ok(marks)
}

/// Largest deviation from the applicable closed form over all samples.
fn analytic_check(traj: &Trajectory, x0: f64, p0: f64) -> Value {
    let params = &traj.params;
    if params.omega_r == 0.0 {
        let dev = traj
            .samples
            .iter()
            .map(|s| (s.state.big_g.norm_sqr() - analytic::frozen_excited_population(x0, params.delta, s.tau)).abs())
            .fold(0.0, f64::max);
        json!({ "oracle": "frozen_position", "quantity": "|G|^2", "max_deviation": dev })
    } else {
        let mut dev = 0.0f64;
        for s in &traj.samples {
            let exact = analytic::resonance_state(x0, p0, params.omega_r, s.tau);
            dev = dev.max(s.state.max_abs_diff(&exact));
        }
        let end = traj.final_state();
        let exact_end = analytic::resonance_state(x0, p0, params.omega_r, traj.samples.last().map_or(0.0, |s| s.tau));
        json!({
            "oracle": "resonance",
            "quantity": "state max-norm",
            "max_deviation": dev,
            "final_deviation": end.max_abs_diff(&exact_end),
        })
    }
}

fn trajectory_script(files: &[String]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'tau'\nset ylabel 'x / wavelength'\n",
    );
    let plots: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using 1:($2/(2*pi)) with lines notitle"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    s
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    let preset = args.paper_fig2.map(|c| c.params());
    if let Some(c) = args.paper_fig2 {
        r.note("preset", &format!("fig2-{}", c.label().to_ascii_lowercase()));
    }
    let fig3 = args.paper_fig3;
    if fig3 {
        r.note("preset", &"fig3");
    }
    let delta = r.required("delta", args.physics.delta, preset.map(|p| p.0).or(fig3.then_some(FIG3_DELTA)))?;
    let p0 = if fig3 {
        None
    } else {
        Some(r.required("p0", args.physics.p0, preset.map(|p| p.1))?)
    };
    let phys = physics(&mut r, &args.physics, delta)?;
    let tau = r.or_default("tau", args.tau, None, 1000.0)?;
    let sample_dt = r.or_default("sample_dt", args.sample_dt, None, 0.1)?;
    let drift_abort = r.or_default("drift_abort", args.drift_abort, None, 1e-6)?;
    let project_norm = r.flag("project_norm", args.project_norm)?;
    let portrait = r.optional("portrait", args.portrait.clone(), None)?;
    let check = r.flag("check_analytic", args.check_analytic)?;

    let opts = IntegratorOptions {
        sample_dt,
        drift_abort,
        project_norm,
        ..common.integrator()
    };
    opts.validate()?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(CliError::usage("--tau must be finite and >= 0"));
    }
    let marks = portrait.as_deref().map(|m| parse_marks(m, tau)).transpose()?;
    if check {
        let p = &phys.params;
        if !p.profile.is_constant() || !(p.delta == 0.0 || p.omega_r == 0.0) {
            return Err(CliError::usage(
                "--check-analytic needs a constant field with --delta 0 or --omega-r 0",
            ));
        }
    }

    let (mut out, info) = start_run(r, &common, started)?;
    let results = if fig3 {
        let mut files = Vec::new();
        let mut rows = Vec::new();
        for k in 0..FIG3_COUNT {
            let p0 = FIG3_P0_MAX * k as f64 / (FIG3_COUNT - 1) as f64;
            let traj = integrate(&AtomState::ground(phys.x0, p0), &phys.params, tau, &opts)?;
            let name = format!("trajectory_{k:02}.csv");
            out.write(&name, |w| write_trajectory_csv(w, &traj))?;
            let end = traj.final_state();
            rows.push(json!({ "file": name, "p0": p0, "x_final": end.x, "p_final": end.p, "drift": traj.drift }));
            files.push(name);
        }
        if common.gnuplot {
            out.write_text("trajectories.gp", &trajectory_script(&files))?;
        }
        json!({ "trajectories": rows })
    } else {
        let p0 = p0.unwrap_or_default();
        let state0 = AtomState::ground(phys.x0, p0);
        let traj = integrate(&state0, &phys.params, tau, &opts)?;
        out.write("trajectory.csv", |w| write_trajectory_csv(w, &traj))?;
        let mut res = json!({
            "samples": traj.samples.len(),
            "drift": traj.drift,
            "stats": traj.stats,
            "initial_regime": initial_regime_estimate(&state0, &phys.params),
        });
        if check {
            let a = analytic_check(&traj, phys.x0, p0);
            out.write_json("analytic_check.json", &a)?;
            res["analytic_check"] = a;
        }
        if let Some(marks) = marks {
            let sets = group_parameter_portrait(&traj, &marks)?;
            let mut cov = Vec::new();
            for set in &sets {
                let name = format!("portrait_tau{}.csv", set.tau_mark);
                out.write(&name, |w| write_portrait_csv(w, set))?;
                cov.push(json!({ "tau": set.tau_mark, "file": name, "coverage": set.coverage }));
            }
            res["portrait"] = Value::Array(cov);
        }
        if common.gnuplot {
            out.write_text("trajectory.gp", &trajectory_script(&["trajectory.csv".to_string()]))?;
        }
        res
    };
    report(&common, &results);
    out.finish("simulate", &info, results)
}
