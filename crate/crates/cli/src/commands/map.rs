use std::time::Instant;

use atomsim::dynamics::SimParams;
use atomsim::io::{write_map_csv, write_map_matrix};
use atomsim::lyapunov::{lyapunov_map, LyapunovOptions};
use atomsim::ode::StepControl;
use serde_json::json;

use super::{method, parse_axis, report, start_run, Common, DEFAULT_OMEGA_R};
use crate::args::{MapArgs, MethodArg};
use crate::config::Resolver;
use crate::error::CliError;

const FIG1_DELTA: &str = "-1:1:200";
const FIG1_P0: &str = "0:60:200";

const MAP_SCRIPT: &str = "set xlabel 'detuning'\nset ylabel 'p0'\nset cblabel 'lambda'\n\
set view map\nplot 'map.dat' nonuniform matrix with image notitle\n";

pub fn run(args: MapArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    if args.paper_fig1 {
        r.note("preset", &"fig1");
    }
    let preset = |v: &str| args.paper_fig1.then(|| v.to_string());
    let delta_text = r.required("delta", args.delta.clone(), preset(FIG1_DELTA))?;
    let p0_text = r.required("p0", args.p0.clone(), preset(FIG1_P0))?;
    let delta_axis = parse_axis(&delta_text, "--delta")?;
    let p0_axis = parse_axis(&p0_text, "--p0")?;
    let x0 = r.or_default("x0", args.x0, None, 0.0)?;
    let omega_r = r.or_default("omega_r", args.omega_r, None, DEFAULT_OMEGA_R)?;
    let sigma_tau = r.optional("sigma_tau", args.sigma_tau, None)?;
    let tau_total = r.or_default("tau_total", args.tau_total, None, 1e4)?;
    let m = r.or_default("method", args.method, None, MethodArg::Variational)?;
    let params = match sigma_tau {
        Some(s) => SimParams::gaussian(omega_r, 0.0, s),
        None => SimParams::constant(omega_r, 0.0),
    };
    params.validate()?;
    let opts = LyapunovOptions {
        method: method(m),
        control: StepControl::with_tol(common.tol),
        ..LyapunovOptions::default()
    };
    opts.validate()?;
    if !(tau_total >= opts.renorm_interval && tau_total.is_finite()) {
        return Err(CliError::usage("--tau-total must be finite and at least one renormalization interval"));
    }

    let (mut out, info) = start_run(r, &common, started)?;
    let map = lyapunov_map(delta_axis, p0_axis, &params, x0, tau_total, &opts, common.schedule())?;
    out.write("map.csv", |w| write_map_csv(w, &map))?;
    let sidecar = json!({
        "delta_axis": map.delta_axis,
        "p0_axis": map.p0_axis,
        "resolution": [map.delta_axis.len(), map.p0_axis.len()],
        "tau_total": tau_total,
        "method": opts.method,
        "x0": x0,
        "omega_r": omega_r,
        "profile": params.profile,
        "missing_cells": map.missing(),
        "max_lambda": map.max_lambda(),
    });
    out.write_json("map.json", &sidecar)?;
    if common.gnuplot {
        out.write("map.dat", |w| write_map_matrix(w, &map))?;
        out.write_text("map.gp", MAP_SCRIPT)?;
    }
    let results = json!({
        "cells": map.delta_axis.len() * map.p0_axis.len(),
        "missing_cells": map.missing(),
        "max_lambda": map.max_lambda(),
    });
    report(&common, &results);
    out.finish("map", &info, results)
}
