use std::time::Instant;

use atomsim::dynamics::{integrate, AtomState, IntegratorOptions, SimParams};
use atomsim::lyapunov::{max_lyapunov, LyapunovOptions};
use atomsim::ode::StepControl;
use atomsim::regimes::{classify, extract_features, DEFAULT_LAMBDA_THRESHOLD, DEFAULT_P_HYSTERESIS};
use serde_json::{json, Value};

use super::{physics, report, start_run, Common};
use crate::args::{ClassifyArgs, Fig2Case};
use crate::config::Resolver;
use crate::error::CliError;

struct Case {
    name: Option<&'static str>,
    params: SimParams,
    x0: f64,
    p0: f64,
}

fn classify_case(case: &Case, tau: f64, opts: &IntegratorOptions, tol: f64, lambda_threshold: f64, p_hyst: f64) -> Result<Value, CliError> {
    let state0 = AtomState::ground(case.x0, case.p0);
    let traj = integrate(&state0, &case.params, tau, opts)?;
    let lyap_opts = LyapunovOptions {
        control: StepControl::with_tol(tol),
        ..LyapunovOptions::default()
    };
    let lyap = max_lyapunov(&state0, &case.params, tau, &lyap_opts)?;
    let features = extract_features(&traj, lyap.lambda, p_hyst)?;
    let label = classify(&features, lambda_threshold);
    Ok(json!({
        "case": case.name,
        "delta": case.params.delta,
        "p0": case.p0,
        "label": label.as_str(),
        "features": features,
        "lambda_converged": lyap.converged,
    }))
}

pub fn run(args: ClassifyArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    let suite = args.paper_fig2;
    if suite {
        r.note("preset", &"fig2");
    }
    let single = if suite {
        None
    } else {
        Some((
            r.required("delta", args.physics.delta, None)?,
            r.required("p0", args.physics.p0, None)?,
        ))
    };
    let phys = physics(&mut r, &args.physics, single.map_or(0.0, |s| s.0))?;
    let tau = r.or_default("tau", args.tau, None, 1e4)?;
    let lambda_threshold = r.or_default("lambda_threshold", args.lambda_threshold, None, DEFAULT_LAMBDA_THRESHOLD)?;
    let p_hyst = r.or_default("p_hyst", args.p_hyst, None, DEFAULT_P_HYSTERESIS)?;
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(CliError::usage("--tau must be finite and >= 1"));
    }
    if !(lambda_threshold >= 0.0 && lambda_threshold.is_finite()) {
        return Err(CliError::usage("--lambda-threshold must be finite and >= 0"));
    }
    if !(p_hyst >= 0.0 && p_hyst.is_finite()) {
        return Err(CliError::usage("--p-hyst must be finite and >= 0"));
    }
    let opts = common.integrator();
    opts.validate()?;

    let cases: Vec<Case> = match single {
        Some((_, p0)) => vec![Case {
            name: None,
            params: phys.params,
            x0: phys.x0,
            p0,
        }],
        None => Fig2Case::ALL
            .iter()
            .map(|c| {
                let (delta, p0) = c.params();
                Case {
                    name: Some(c.label()),
                    params: SimParams { delta, ..phys.params },
                    x0: phys.x0,
                    p0,
                }
            })
            .collect(),
    };

    let (mut out, info) = start_run(r, &common, started)?;
    let rows = cases
        .iter()
        .map(|c| classify_case(c, tau, &opts, common.tol, lambda_threshold, p_hyst))
        .collect::<Result<Vec<_>, _>>()?;
    let results = json!({
        "tau": tau,
        "lambda_threshold": lambda_threshold,
        "p_hysteresis": p_hyst,
        "cases": rows,
    });
    out.write_json("classification.json", &results)?;
    for row in &rows {
        match row["case"].as_str() {
            Some(name) => eprintln!("{name}: {}", row["label"].as_str().unwrap_or("?")),
            None => eprintln!("{}", row["label"].as_str().unwrap_or("?")),
        }
    }
    report(&common, &results);
    out.finish("classify", &info, results)
}
