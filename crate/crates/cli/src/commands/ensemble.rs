use std::f64::consts::PI;
use std::time::Instant;

use atomsim::dynamics::SimParams;
use atomsim::ensemble::{histogram, run_ensemble, EnsembleResult, EnsembleSpec};
use atomsim::io::{write_ensemble_csv, write_histogram_csv};
use serde_json::{json, Value};

use super::{parse_span, report, start_run, Common, DEFAULT_OMEGA_R};
use crate::args::EnsembleArgs;
use crate::config::Resolver;
use crate::error::CliError;
use crate::output::OutDir;

const FIG10B_ATOMS: usize = 10_000;
const FIG10B_DELTAS: [(f64, &str); 2] = [(0.2, "_delta0.2"), (1.0, "_delta1")];
const DEFAULT_ATOMS: usize = 1000;
const DEFAULT_SIGMA_TAU: f64 = 400.0;
const PEAK_FRACTION: f64 = 0.05;

fn histogram_script(tags: &[&str]) -> String {
    let plots: Vec<String> = tags
        .iter()
        .map(|t| format!("'histogram{t}.csv' using ($1+0.5*bw):3 with steps title '{}'", t.trim_start_matches('_')))
        .collect();
    format!(
        "set datafile separator ','\nbw = 0.25\nset xlabel 'x / wavelength'\nset ylabel 'density'\nplot {}\n",
        plots.join(", \\\n     ")
    )
}

fn write_one(out: &mut OutDir, tag: &str, res: &EnsembleResult, bin_width: f64, span: (f64, f64)) -> Result<Value, CliError> {
    out.write(&format!("ensemble{tag}.csv"), |w| write_ensemble_csv(w, res))?;
    // Histogram positions in wavelengths.
    let waves: Vec<f64> = res.final_positions().iter().map(|x| x / (2.0 * PI)).collect();
    let mut row = json!({
        "delta": res.spec.params.delta,
        "summary": res.summary,
        "excluded": res.summary.n_failed,
    });
    if waves.is_empty() {
        row["histogram"] = Value::Null;
        return Ok(row);
    }
    let h = histogram(&waves, bin_width, span.0, span.1)?;
    let name = format!("histogram{tag}.csv");
    out.write(&name, |w| write_histogram_csv(w, &h))?;
    let peak = h.density.iter().copied().fold(0.0, f64::max);
    row["histogram"] = json!({
        "file": name,
        "in_range": h.in_range,
        "support_width_wavelengths": h.support_width(PEAK_FRACTION),
        "local_maxima": h.local_maxima(PEAK_FRACTION * peak).len(),
    });
    row["std_x_wavelengths"] = json!(res.summary.std_x / (2.0 * PI));
    Ok(row)
}

pub fn run(args: EnsembleArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    let fig = args.paper_fig10b;
    if fig {
        r.note("preset", &"fig10b");
    }
    let deltas: Vec<(f64, String)> = if fig {
        FIG10B_DELTAS.iter().map(|&(d, t)| (d, t.to_string())).collect()
    } else {
        vec![(r.required("delta", args.physics.delta, None)?, String::new())]
    };
    let n_atoms = r.or_default("n_atoms", args.n_atoms, fig.then_some(FIG10B_ATOMS), DEFAULT_ATOMS)?;
    let x0 = r.or_default("x0", args.physics.x0, None, 0.0)?;
    let p0 = r.or_default("p0", args.physics.p0, None, 10.0)?;
    let sigma_x = r.or_default("sigma_x", args.sigma_x, None, 2.0)?;
    let sigma_p = r.or_default("sigma_p", args.sigma_p, None, 2.0)?;
    let omega_r = r.or_default("omega_r", args.physics.omega_r, None, DEFAULT_OMEGA_R)?;
    let sigma_tau = r.or_default("sigma_tau", args.physics.sigma_tau, None, DEFAULT_SIGMA_TAU)?;
    let tau = r.or_default("tau", args.tau, None, 1000.0)?;
    let bin_width = r.or_default("bin_width", args.bin_width, None, 0.25)?;
    let range = r.or_default("range", args.range.clone(), None, "-6:6".to_string())?;
    let span = parse_span(&range, "--range")?;
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(CliError::usage("--bin-width must be positive"));
    }
    let specs = deltas
        .iter()
        .map(|(delta, tag)| {
            let spec = EnsembleSpec {
                n_atoms,
                x0_mean: x0,
                p0_mean: p0,
                sigma_x,
                sigma_p,
                seed: common.seed,
                params: SimParams::gaussian(omega_r, *delta, sigma_tau),
                tau_end: tau,
            };
            spec.validate().map(|_| (spec, tag.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let opts = common.integrator();
    opts.validate()?;

    let (mut out, info) = start_run(r, &common, started)?;
    let mut rows = Vec::new();
    for (spec, tag) in &specs {
        let res = run_ensemble(spec, &opts, common.schedule())?;
        rows.push(write_one(&mut out, tag, &res, bin_width, span)?);
    }
    if common.gnuplot {
        let tags: Vec<&str> = specs.iter().map(|(_, t)| t.as_str()).collect();
        out.write_text("histogram.gp", &histogram_script(&tags))?;
    }
    let results = json!({ "seed": common.seed, "n_atoms": n_atoms, "ensembles": rows });
    report(&common, &results);
    out.finish("ensemble", &info, results)
}
