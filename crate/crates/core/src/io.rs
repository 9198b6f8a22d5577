//! CSV and matrix writers for simulation outputs.
//!
//! Floats are written with 17 significant digits so files round-trip
//! exactly.

use std::io::{self, Write};

use crate::dynamics::Trajectory;
use crate::ensemble::{EnsembleResult, Histogram};
use crate::lyapunov::{ChaosMap, LyapunovResult};
use crate::regimes::PortraitSet;

/// Format with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_string()
    }
}

pub const TRAJECTORY_HEADER: &str = "tau,x,p,g1,g2,G1,G2,H,norm,u";

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        let st = &s.state;
        let row = [
            s.tau,
            st.x,
            st.p,
            st.g.re,
            st.g.im,
            st.big_g.re,
            st.big_g.im,
            s.energy,
            s.norm,
            s.u,
        ];
        writeln!(w, "{}", join(&row))?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn write_convergence_csv<W: Write>(mut w: W, result: &LyapunovResult) -> io::Result<()> {
    writeln!(w, "tau,lambda")?;
    for e in &result.convergence_series {
        writeln!(w, "{},{}", fmt_f64(e.tau), fmt_f64(e.lambda))?;
    }
    Ok(())
}

/// Long format `delta,p0,lambda,converged`; failed cells have an empty
/// `lambda` field.
pub fn write_map_csv<W: Write>(mut w: W, map: &ChaosMap) -> io::Result<()> {
    writeln!(w, "delta,p0,lambda,converged")?;
    for (i, d) in map.delta_axis.iter().enumerate() {
        for (j, p) in map.p0_axis.iter().enumerate() {
            let cell = map.cells[i][j];
            let lambda = cell.lambda.map(fmt_f64).unwrap_or_default();
            writeln!(w, "{},{},{},{}", fmt_f64(*d), fmt_f64(*p), lambda, cell.converged)?;
        }
    }
    Ok(())
}

/// Gnuplot `matrix nonuniform` layout: first row holds the Δ axis, each
/// following row starts with p₀. Missing cells are written as `NaN`.
pub fn write_map_matrix<W: Write>(mut w: W, map: &ChaosMap) -> io::Result<()> {
    let mut head = vec![map.delta_axis.len().to_string()];
    head.extend(map.delta_axis.iter().map(|d| fmt_f64(*d)));
    writeln!(w, "{}", head.join(" "))?;
    for (j, p) in map.p0_axis.iter().enumerate() {
        let mut row = vec![fmt_f64(*p)];
        row.extend(
            map.delta_axis
                .iter()
                .enumerate()
                .map(|(i, _)| map.cells[i][j].lambda.map(fmt_f64).unwrap_or_else(|| "NaN".into())),
        );
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_portrait_csv<W: Write>(mut w: W, set: &PortraitSet) -> io::Result<()> {
    writeln!(w, "tau,g1,g2")?;
    for p in &set.points {
        writeln!(w, "{}", join(p))?;
    }
    Ok(())
}

/// One row per atom; failed atoms keep their id with empty fields.
pub fn write_ensemble_csv<W: Write>(mut w: W, result: &EnsembleResult) -> io::Result<()> {
    writeln!(w, "atom_id,x_final,p_final,g1,g2,G1,G2,norm")?;
    for a in &result.atoms {
        match a.final_state {
            Some(s) => {
                let row = [s.x, s.p, s.g.re, s.g.im, s.big_g.re, s.big_g.im, s.norm()];
                writeln!(w, "{},{}", a.atom_id, join(&row))?;
            }
            None => writeln!(w, "{},,,,,,,", a.atom_id)?,
        }
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(mut w: W, h: &Histogram) -> io::Result<()> {
    writeln!(w, "bin_left,count,density")?;
    for ((l, c), d) in h.bin_left.iter().zip(&h.counts).zip(&h.density) {
        writeln!(w, "{},{},{}", fmt_f64(*l), c, fmt_f64(*d))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }
}
