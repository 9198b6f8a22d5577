use std::time::Instant;

use atomsim::dynamics::AtomState;
use atomsim::io::write_convergence_csv;
use atomsim::lyapunov::{max_lyapunov, predictability_time, LyapunovOptions};
use atomsim::SimError;
use atomsim::ode::StepControl;
use serde_json::{json, Value};

use super::{method, physics, report, start_run, Common};
use crate::args::{LyapArgs, MethodArg};
use crate::config::Resolver;
use crate::error::CliError;

pub fn run(args: LyapArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    let delta = r.required("delta", args.physics.delta, None)?;
    let p0 = r.required("p0", args.physics.p0, None)?;
    let phys = physics(&mut r, &args.physics, delta)?;
    let tau_total = r.or_default("tau_total", args.tau_total, None, 1e5)?;
    let m = r.or_default("method", args.method, None, MethodArg::Variational)?;
    let defaults = LyapunovOptions::default();
    let opts = LyapunovOptions {
        method: method(m),
        control: StepControl::with_tol(common.tol),
        renorm_interval: r.or_default("renorm_interval", args.renorm_interval, None, defaults.renorm_interval)?,
        separation: r.or_default("separation", args.separation, None, defaults.separation)?,
        ..defaults
    };
    let dx_conf = r.optional("dx_confidence", args.dx_confidence, None)?;
    let dx0 = r.optional("dx0", args.dx0, None)?;
    opts.validate()?;
    if dx_conf.is_some() != dx0.is_some() {
        return Err(CliError::usage("--dx-confidence and --dx0 go together"));
    }
    if let (Some(c), Some(d)) = (dx_conf, dx0) {
        if !(d > 0.0 && c >= d) {
            return Err(CliError::usage("need dx-confidence >= dx0 > 0"));
        }
    }
    if !(tau_total >= opts.renorm_interval && tau_total.is_finite()) {
        return Err(CliError::usage("--tau-total must be finite and at least one renormalization interval"));
    }

    let (mut out, info) = start_run(r, &common, started)?;
    let res = max_lyapunov(&AtomState::ground(phys.x0, p0), &phys.params, tau_total, &opts)?;
    out.write("convergence.csv", |w| write_convergence_csv(w, &res))?;
    let predictability = match (dx_conf, dx0) {
        (Some(c), Some(d)) => match predictability_time(res.lambda, c, d) {
            Ok(t) => json!(t),
            // Regular motion: no finite horizon.
            Err(SimError::NonPositiveLyapunov(_)) => Value::Null,
            Err(e) => return Err(e.into()),
        },
        _ => Value::Null,
    };
    let results = json!({
        "lambda": res.lambda,
        "converged": res.converged,
        "tau_total": res.tau_total,
        "method": res.method,
        "renorm_interval": opts.renorm_interval,
        "predictability_time": predictability,
    });
    out.write_json("lyapunov.json", &results)?;
    if common.gnuplot {
        out.write_text(
            "convergence.gp",
            "set datafile separator ','\nset key autotitle columnhead\nset logscale x\n\
             set xlabel 'tau'\nset ylabel 'running lambda'\nplot 'convergence.csv' using 1:2 with lines notitle\n",
        )?;
    }
    report(&common, &results);
    out.finish("lyap", &info, results)
}
