//! Monte Carlo ensembles of atoms, histograms and physical-unit conversion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, AtomState, Drift, IntegratorOptions, SimParams};
use crate::error::{Result, SimError};
use crate::lyapunov::Schedule;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁷Li, kg.
pub const LITHIUM7_MASS: f64 = 7.016_003_436_6 * ATOMIC_MASS_UNIT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_atoms: usize,
    pub x0_mean: f64,
    pub p0_mean: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
    pub seed: u64,
    pub params: SimParams,
    pub tau_end: f64,
}

impl EnsembleSpec {
    /// Beam of lithium atoms crossing a Gaussian standing wave.
    pub fn gaussian_beam(delta: f64, n_atoms: usize, seed: u64) -> Self {
        Self {
            n_atoms,
            x0_mean: 0.0,
            p0_mean: 10.0,
            sigma_x: 2.0,
            sigma_p: 2.0,
            seed,
            params: SimParams::gaussian(1e-3, delta, 400.0),
            tau_end: 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_atoms == 0 {
            return Err(SimError::invalid("n_atoms", "must be at least 1"));
        }
        for (name, v) in [("x0_mean", self.x0_mean), ("p0_mean", self.p0_mean)] {
            if !v.is_finite() {
                return Err(SimError::invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("sigma_x", self.sigma_x), ("sigma_p", self.sigma_p)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, "must be finite and >= 0"));
            }
        }
        if !(self.tau_end >= 0.0 && self.tau_end.is_finite()) {
            return Err(SimError::invalid("tau_end", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Initial `(x, p)` of atom `atom_id`. The generator is keyed by the
    /// seed and selects one stream per atom, so draws never depend on the
    /// order in which atoms are processed.
    pub fn initial_position_momentum(&self, atom_id: u64) -> (f64, f64) {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(atom_id);
        let zx: f64 = rng.sample(StandardNormal);
        let zp: f64 = rng.sample(StandardNormal);
        (self.x0_mean + self.sigma_x * zx, self.p0_mean + self.sigma_p * zp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomOutcome {
    pub atom_id: u64,
    pub x0: f64,
    pub p0: f64,
    /// `None` when the integration failed.
    pub final_state: Option<AtomState>,
    pub drift: Option<Drift>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_atoms: usize,
    pub n_failed: usize,
    pub mean_x: f64,
    pub std_x: f64,
    pub mean_p: f64,
    pub std_p: f64,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub spec: EnsembleSpec,
    pub atoms: Vec<AtomOutcome>,
    pub summary: EnsembleSummary,
}

impl EnsembleResult {
    /// Final positions of the atoms that completed.
    pub fn final_positions(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .filter_map(|a| a.final_state.map(|s| s.x))
            .collect()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    mean_std(values.iter().copied()).1
}

/// Draw the ensemble, integrate every atom from the ground state and
/// summarize. Failed atoms are kept with their error and excluded from the
/// statistics.
pub fn run_ensemble(spec: &EnsembleSpec, opts: &IntegratorOptions, schedule: Schedule) -> Result<EnsembleResult> {
    spec.validate()?;
    opts.validate()?;
    let one = |i: usize| {
        let atom_id = i as u64;
        let (x0, p0) = spec.initial_position_momentum(atom_id);
        match propagate(&AtomState::ground(x0, p0), &spec.params, spec.tau_end, opts) {
            Ok((s, d)) => AtomOutcome {
                atom_id,
                x0,
                p0,
                final_state: Some(s),
                drift: Some(d),
                error: None,
            },
            Err(e) => AtomOutcome {
                atom_id,
                x0,
                p0,
                final_state: None,
                drift: None,
                error: Some(e.to_string()),
            },
        }
    };
    let atoms: Vec<AtomOutcome> = match schedule {
        Schedule::Parallel => (0..spec.n_atoms).into_par_iter().map(one).collect(),
        Schedule::Sequential => (0..spec.n_atoms).map(one).collect(),
    };
    let ok = atoms.iter().filter_map(|a| a.final_state);
    let (mean_x, std_x) = mean_std(ok.clone().map(|s| s.x));
    let (mean_p, std_p) = mean_std(ok.map(|s| s.p));
    let summary = EnsembleSummary {
        n_atoms: spec.n_atoms,
        n_failed: atoms.iter().filter(|a| a.final_state.is_none()).count(),
        mean_x,
        std_x,
        mean_p,
        std_p,
        max_norm_drift: atoms
            .iter()
            .filter_map(|a| a.drift.map(|d| d.norm))
            .fold(0.0, f64::max),
    };
    Ok(EnsembleResult {
        spec: *spec,
        atoms,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bin_left: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts normalized to unit integral over the in-range values.
    pub density: Vec<f64>,
    pub in_range: u64,
    pub total: u64,
}

impl Histogram {
    /// Local maxima of the density that strictly exceed both neighbours
    /// (plateaus count once) and reach `min_density`.
    pub fn local_maxima(&self, min_density: f64) -> Vec<usize> {
        let d = &self.density;
        let mut out = Vec::new();
        let mut i = 0;
        while i < d.len() {
            let mut j = i;
            while j + 1 < d.len() && d[j + 1] == d[i] {
                j += 1;
            }
            let left_lower = i == 0 || d[i - 1] < d[i];
            let right_lower = j + 1 == d.len() || d[j + 1] < d[i];
            if left_lower && right_lower && d[i] >= min_density && d[i] > 0.0 {
                out.push(i);
            }
            i = j + 1;
        }
        out
    }

    /// Width from the left edge of the first to the right edge of the last
    /// bin whose density is at least `fraction` of the peak density.
    pub fn support_width(&self, fraction: f64) -> f64 {
        let peak = self.density.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let cut = fraction * peak;
        let first = self.density.iter().position(|&v| v >= cut);
        let last = self.density.iter().rposition(|&v| v >= cut);
        match (first, last) {
            (Some(a), Some(b)) => self.bin_left[b] + self.bin_width - self.bin_left[a],
            _ => 0.0,
        }
    }
}

/// Bin `values` into `[lo, hi)` with left-closed right-open bins of width
/// `bin_width`; the last bin is truncated at `hi` if the width does not
/// divide the range.
pub fn histogram(values: &[f64], bin_width: f64, lo: f64, hi: f64) -> Result<Histogram> {
    if values.is_empty() {
        return Err(SimError::EmptyInput("histogram values"));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(SimError::invalid("bin_width", "must be positive"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(SimError::invalid("range", "need finite lo < hi"));
    }
    let n_bins = ((hi - lo) / bin_width - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut in_range = 0u64;
    for &v in values {
        if v >= lo && v < hi {
            let k = (((v - lo) / bin_width).floor() as usize).min(n_bins - 1);
            counts[k] += 1;
            in_range += 1;
        }
    }
    let bin_left: Vec<f64> = (0..n_bins).map(|k| lo + k as f64 * bin_width).collect();
    let density = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            if in_range == 0 {
                return 0.0;
            }
            let width = (lo + (k + 1) as f64 * bin_width).min(hi) - bin_left[k];
            c as f64 / (in_range as f64 * width)
        })
        .collect();
    Ok(Histogram {
        bin_width,
        bin_left,
        counts,
        density,
        in_range,
        total: values.len() as u64,
    })
}

/// Laboratory parameters of the beam experiment (SI units, frequencies in Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    pub wavelength: f64,
    pub recoil_frequency: f64,
    /// Peak Rabi frequency divided by 2π.
    pub rabi_frequency: f64,
    pub beam_radius: f64,
    pub longitudinal_velocity: f64,
}

impl PhysicalSetup {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("recoil_frequency", self.recoil_frequency),
            ("rabi_frequency", self.rabi_frequency),
            ("beam_radius", self.beam_radius),
            ("longitudinal_velocity", self.longitudinal_velocity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Angular Rabi frequency in rad/s.
    pub fn angular_rabi(&self) -> f64 {
        2.0 * PI * self.rabi_frequency
    }
}

/// Recoil frequency `h / (2 m λ²)` in Hz.
pub fn recoil_frequency(wavelength: f64, mass: f64) -> Result<f64> {
    if !(wavelength > 0.0 && mass > 0.0 && wavelength.is_finite() && mass.is_finite()) {
        return Err(SimError::invalid("wavelength/mass", "must be positive"));
    }
    Ok(PLANCK / (2.0 * mass * wavelength * wavelength))
}

/// Dimensionless recoil frequency `ħk²/(mΩ₀) = 2ν_rec/(Ω₀/2π)`.
pub fn omega_r_from(recoil_frequency: f64, rabi_frequency: f64) -> Result<f64> {
    if !(recoil_frequency > 0.0 && rabi_frequency > 0.0) {
        return Err(SimError::invalid("frequency", "must be positive"));
    }
    Ok(2.0 * recoil_frequency / rabi_frequency)
}

/// Longitudinal velocity that yields the interaction time `sigma_tau`.
pub fn velocity_for_sigma_tau(beam_radius: f64, rabi_frequency: f64, sigma_tau: f64) -> Result<f64> {
    if !(beam_radius > 0.0 && rabi_frequency > 0.0 && sigma_tau > 0.0) {
        return Err(SimError::invalid("sigma_tau", "inputs must be positive"));
    }
    Ok(beam_radius * 2.0 * PI * rabi_frequency / sigma_tau)
}

/// Dimensionless `(omega_r, sigma_tau)` of a laboratory setup.
pub fn normalize_physical(setup: &PhysicalSetup) -> Result<(f64, f64)> {
    setup.validate()?;
    let omega_r = omega_r_from(setup.recoil_frequency, setup.rabi_frequency)?;
    let sigma_tau = setup.beam_radius * setup.angular_rabi() / setup.longitudinal_velocity;
    Ok((omega_r, sigma_tau))
}
