use std::path::PathBuf;
use std::time::Instant;

use atomsim::dynamics::{IntegratorOptions, SimParams};
use atomsim::lyapunov::{AxisRange, LyapunovMethod, Schedule};
use serde_json::Value;

use crate::args::{CommonArgs, MethodArg, PhysicsArgs};
use crate::config::Resolver;
use crate::error::CliError;
use crate::output::{OutDir, RunInfo};

pub mod classify;
pub mod convert;
pub mod ensemble;
pub mod lyap;
pub mod map;
pub mod simulate;

pub const DEFAULT_OUT: &str = "atomsim-out";
pub const DEFAULT_OMEGA_R: f64 = 1e-3;

/// Settings shared by every subcommand.
pub struct Common {
    pub out: PathBuf,
    pub seed: u64,
    pub deterministic: bool,
    pub jobs: Option<usize>,
    pub tol: f64,
    pub gnuplot: bool,
    pub quiet: bool,
}

impl Common {
    pub fn resolve(r: &mut Resolver, args: &CommonArgs) -> Result<Self, CliError> {
        let out = r.or_default("out", args.out.as_ref().map(|p| p.display().to_string()), None, DEFAULT_OUT.into())?;
        let c = Self {
            out: PathBuf::from(out),
            seed: r.or_default("seed", args.seed, None, 0)?,
            deterministic: r.flag("deterministic", args.deterministic)?,
            jobs: r.optional("jobs", args.jobs, None)?,
            tol: r.or_default("tol", args.tol, None, 1e-10)?,
            gnuplot: r.flag("gnuplot", args.gnuplot)?,
            // Presentation only, so kept out of the echoed configuration.
            quiet: args.quiet,
        };
        if c.jobs == Some(0) {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        if !(c.tol > 0.0 && c.tol < 1.0) {
            return Err(CliError::usage("--tol must lie in (0, 1)"));
        }
        Ok(c)
    }

    pub fn schedule(&self) -> Schedule {
        if self.deterministic {
            Schedule::Sequential
        } else {
            Schedule::Parallel
        }
    }

    /// Bound the global worker pool. A pool that already exists (as in
    /// tests calling several commands) is left as is.
    pub fn init_threads(&self) {
        if let Some(n) = self.jobs {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::with_tol(self.tol)
    }
}

/// Close the resolver, prepare the output directory and timing record.
/// The output path is left out of the echoed configuration so that runs
/// into different directories stay byte-identical.
pub fn start_run(r: Resolver, common: &Common, started: Instant) -> Result<(OutDir, RunInfo), CliError> {
    let mut config = r.finish()?;
    config.remove("out");
    let out = OutDir::create(&common.out)?;
    common.init_threads();
    Ok((
        out,
        RunInfo {
            config,
            deterministic: common.deterministic,
            started,
        },
    ))
}

pub struct Physics {
    pub params: SimParams,
    pub x0: f64,
}

/// Resolve `omega_r`, `x0`, `sigma_tau` plus the given detuning.
pub fn physics(r: &mut Resolver, args: &PhysicsArgs, delta: f64) -> Result<Physics, CliError> {
    let x0 = r.or_default("x0", args.x0, None, 0.0)?;
    let omega_r = r.or_default("omega_r", args.omega_r, None, DEFAULT_OMEGA_R)?;
    let sigma_tau = r.optional("sigma_tau", args.sigma_tau, None)?;
    let params = match sigma_tau {
        Some(s) => SimParams::gaussian(omega_r, delta, s),
        None => SimParams::constant(omega_r, delta),
    };
    params.validate()?;
    if !x0.is_finite() {
        return Err(CliError::usage("--x0 must be finite"));
    }
    Ok(Physics { params, x0 })
}

pub fn method(m: MethodArg) -> LyapunovMethod {
    match m {
        MethodArg::Variational => LyapunovMethod::Variational,
        MethodArg::TwoTrajectory => LyapunovMethod::TwoTrajectory,
    }
}

pub fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Variational => "variational",
        MethodArg::TwoTrajectory => "two-trajectory",
    }
}

impl std::str::FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "variational" => Ok(MethodArg::Variational),
            "two-trajectory" | "two_trajectory" => Ok(MethodArg::TwoTrajectory),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

impl serde::Serialize for MethodArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(method_name(*self))
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64, CliError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| CliError::usage(format!("{what}: `{field}`: {e}")))
}

/// `start:end:count`, or a single value for a one-point axis.
pub fn parse_axis(text: &str, what: &str) -> Result<AxisRange, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let axis = match parts.as_slice() {
        [v] => AxisRange::point(parse_f64(v, what)?),
        [a, b, n] => {
            let count = n
                .trim()
                .parse::<usize>()
                .map_err(|e| CliError::usage(format!("{what}: count `{n}`: {e}")))?;
            AxisRange::new(parse_f64(a, what)?, parse_f64(b, what)?, count)
        }
        _ => return Err(CliError::usage(format!("{what}: expected start:end:count, got `{text}`"))),
    };
    axis.validate("axis").map_err(|e| CliError::usage(format!("{what}: {e}")))?;
    Ok(axis)
}

/// `lo:hi` with `lo < hi`.
pub fn parse_span(text: &str, what: &str) -> Result<(f64, f64), CliError> {
    match text.split(':').collect::<Vec<_>>().as_slice() {
        [a, b] => {
            let (lo, hi) = (parse_f64(a, what)?, parse_f64(b, what)?);
            if lo < hi {
                Ok((lo, hi))
            } else {
                Err(CliError::usage(format!("{what}: need lo < hi, got `{text}`")))
            }
        }
        _ => Err(CliError::usage(format!("{what}: expected lo:hi, got `{text}`"))),
    }
}

/// Print the results object that also goes into the manifest.
/// Print the run summary on stdout unless `--quiet`.
pub fn report(common: &Common, results: &Value) {
    if common.quiet {
        return;
    }
    println!("{}", serde_json::to_string_pretty(results).unwrap_or_default());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_and_span_parsing() {
        let a = parse_axis("-1:1:5", "delta").unwrap();
        assert_eq!(a.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_axis("0.3", "delta").unwrap().values(), vec![0.3]);
        assert!(parse_axis("0:1:1", "delta").is_err());
        assert!(parse_axis("0:1", "delta").is_err());
        assert!(parse_axis("a:1:3", "delta").is_err());
        assert_eq!(parse_span("-6:6", "range").unwrap(), (-6.0, 6.0));
        assert!(parse_span("6:-6", "range").is_err());
    }
}
