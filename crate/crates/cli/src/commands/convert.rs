use std::time::Instant;

use atomsim::ensemble::{normalize_physical, recoil_frequency, velocity_for_sigma_tau, PhysicalSetup, LITHIUM7_MASS};
use serde_json::json;

use super::{report, start_run, Common};
use crate::args::ConvertArgs;
use crate::config::Resolver;
use crate::error::CliError;

pub fn run(args: ConvertArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut r = Resolver::load(args.common.config.as_deref())?;
    let common = Common::resolve(&mut r, &args.common)?;
    let wavelength = r.required("wavelength", args.wavelength, None)?;
    let rabi = r.required("rabi", args.rabi, None)?;
    let radius = r.required("radius", args.radius, None)?;
    let mass = r.or_default("mass", args.mass, None, LITHIUM7_MASS)?;
    let recoil = match r.optional("recoil", args.recoil, None)? {
        Some(v) => v,
        None => {
            let v = recoil_frequency(wavelength, mass)?;
            r.note("recoil_derived", &v);
            v
        }
    };
    let velocity = r.optional("velocity", args.velocity, None)?;
    let sigma_tau = r.optional("sigma_tau", args.sigma_tau, None)?;
    let velocity = match (velocity, sigma_tau) {
        (Some(v), None) => v,
        (None, Some(s)) => velocity_for_sigma_tau(radius, rabi, s)?,
        (Some(_), Some(_)) => return Err(CliError::usage("give either --velocity or --sigma-tau, not both")),
        (None, None) => return Err(CliError::usage("missing required value `--velocity` or `--sigma-tau`")),
    };
    let setup = PhysicalSetup {
        wavelength,
        recoil_frequency: recoil,
        rabi_frequency: rabi,
        beam_radius: radius,
        longitudinal_velocity: velocity,
    };
    let (omega_r, sigma_tau) = normalize_physical(&setup)?;

    let (mut out, info) = start_run(r, &common, started)?;
    let results = json!({
        "omega_r": omega_r,
        "sigma_tau": sigma_tau,
        "recoil_frequency_hz": recoil,
        "longitudinal_velocity_m_s": velocity,
        "setup": setup,
    });
    out.write_json("convert.json", &results)?;
    report(&common, &results);
    out.finish("convert", &info, results)
}
