//! Coupled quantum–classical motion of a two-level atom in a standing wave.
//!
//! In normalized units (time `τ = Ω₀ t`, position `x = k_f X`, momentum in
//! units of `ħk_f`) the state `(x, p, g, G)` obeys
//!
//! ```text
//! x' = ω_r p
//! p' = Ω(τ) u sin x,          u = g G* + g* G
//! g' = i Ω(τ) G cos x
//! G' = -i Δ G + i Ω(τ) g cos x
//! ```
//!
//! with `Ω(τ) ≡ 1` for a constant field. For a constant field the energy
//! `H = ω_r p²/2 + u cos x - Δ/2 (|G|² - |g|²)` and the norm `|g|² + |G|²`
//! are conserved.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::ode::{Dop853, OdeSystem, StepControl};

/// Accepted `| |g|²+|G|² - 1 |` for an initial state.
pub const INITIAL_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    /// Position `x = k_f X`.
    pub x: f64,
    /// Momentum in units of `ħk_f`.
    pub p: f64,
    /// Ground-state group parameter `g = g1 + i g2`.
    pub g: Complex64,
    /// Excited-state companion `G = G1 + i G2`.
    pub big_g: Complex64,
}

impl AtomState {
    /// Atom prepared in the ground state (`g = 1`, `G = 0`).
    pub fn ground(x: f64, p: f64) -> Self {
        Self {
            x,
            p,
            g: Complex64::new(1.0, 0.0),
            big_g: Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.p, self.g.re, self.g.im, self.big_g.re, self.big_g.im]
    }

    pub fn from_array(y: &[f64; 6]) -> Self {
        Self {
            x: y[0],
            p: y[1],
            g: Complex64::new(y[2], y[3]),
            big_g: Complex64::new(y[4], y[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `|g|² + |G|²`.
    pub fn norm(&self) -> f64 {
        self.g.norm_sqr() + self.big_g.norm_sqr()
    }

    /// Rescale `(g, G)` to unit norm.
    pub fn normalized(&self) -> Self {
        let n = self.norm().sqrt();
        Self {
            g: self.g / n,
            big_g: self.big_g / n,
            ..*self
        }
    }

    /// Max-norm distance over the six real coordinates.
    pub fn max_abs_diff(&self, other: &AtomState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldProfile {
    Constant,
    /// Beam crossed at constant speed: `Ω(τ) = exp[-(τ - 3σ/2)²/σ²]`.
    Gaussian { sigma_tau: f64 },
}

impl FieldProfile {
    pub fn amplitude(&self, tau: f64) -> f64 {
        match *self {
            FieldProfile::Constant => 1.0,
            FieldProfile::Gaussian { sigma_tau } => {
                let s = (tau - 1.5 * sigma_tau) / sigma_tau;
                (-s * s).exp()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FieldProfile::Constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Normalized recoil frequency `ħk_f²/(m_a Ω₀)`. Zero freezes the position.
    pub omega_r: f64,
    /// Normalized detuning `(ω_f - ω_a)/Ω₀`.
    pub delta: f64,
    pub profile: FieldProfile,
}

impl SimParams {
    pub fn constant(omega_r: f64, delta: f64) -> Self {
        Self {
            omega_r,
            delta,
            profile: FieldProfile::Constant,
        }
    }

    pub fn gaussian(omega_r: f64, delta: f64, sigma_tau: f64) -> Self {
        Self {
            omega_r,
            delta,
            profile: FieldProfile::Gaussian { sigma_tau },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_r.is_finite() || self.omega_r < 0.0 {
            return Err(SimError::invalid(
                "omega_r",
                format!("must be finite and >= 0, got {}", self.omega_r),
            ));
        }
        if !self.delta.is_finite() {
            return Err(SimError::invalid("delta", "must be finite"));
        }
        if let FieldProfile::Gaussian { sigma_tau } = self.profile {
            if !(sigma_tau > 0.0 && sigma_tau.is_finite()) {
                return Err(SimError::invalid(
                    "sigma_tau",
                    format!("must be positive, got {sigma_tau}"),
                ));
            }
        }
        Ok(())
    }
}

/// `u = g G* + g* G = 2(g1 G1 + g2 G2)`; the dipole expectation is `-u`.
pub fn interaction_energy(state: &AtomState) -> f64 {
    2.0 * (state.g.re * state.big_g.re + state.g.im * state.big_g.im)
}

/// Total energy with the field amplitude evaluated at `tau`.
pub fn energy_at(state: &AtomState, params: &SimParams, tau: f64) -> f64 {
    let amp = params.profile.amplitude(tau);
    0.5 * params.omega_r * state.p * state.p + amp * interaction_energy(state) * state.x.cos()
        - 0.5 * params.delta * (state.big_g.norm_sqr() - state.g.norm_sqr())
}

/// Total energy `H` for the constant (unit-amplitude) field.
pub fn energy(state: &AtomState, params: &SimParams) -> f64 {
    0.5 * params.omega_r * state.p * state.p + interaction_energy(state) * state.x.cos()
        - 0.5 * params.delta * (state.big_g.norm_sqr() - state.g.norm_sqr())
}

#[inline]
pub(crate) fn rhs_raw(omega_r: f64, delta: f64, amp: f64, y: &[f64; 6], dy: &mut [f64; 6]) {
    let (s, c) = y[0].sin_cos();
    let u = 2.0 * (y[2] * y[4] + y[3] * y[5]);
    let fc = amp * c;
    dy[0] = omega_r * y[1];
    dy[1] = amp * u * s;
    dy[2] = -fc * y[5];
    dy[3] = fc * y[4];
    dy[4] = delta * y[5] - fc * y[3];
    dy[5] = -delta * y[4] + fc * y[2];
}

/// Time derivative of the state, returned in `AtomState` layout.
pub fn derivatives(state: &AtomState, params: &SimParams, tau: f64) -> Result<AtomState> {
    if !state.is_finite() {
        return Err(SimError::NonFinite("atom state"));
    }
    if !tau.is_finite() {
        return Err(SimError::NonFinite("tau"));
    }
    let mut dy = [0.0; 6];
    rhs_raw(
        params.omega_r,
        params.delta,
        params.profile.amplitude(tau),
        &state.to_array(),
        &mut dy,
    );
    Ok(AtomState::from_array(&dy))
}

pub(crate) struct AtomSystem {
    pub params: SimParams,
}

impl OdeSystem<6> for AtomSystem {
    #[inline]
    fn rhs(&self, t: f64, y: &[f64; 6], dy: &mut [f64; 6]) {
        let amp = self.params.profile.amplitude(t);
        rhs_raw(self.params.omega_r, self.params.delta, amp, y, dy);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub control: StepControl,
    /// Output spacing of [`Trajectory`] samples.
    pub sample_dt: f64,
    /// Abort when a monitored invariant drifts by more than this.
    pub drift_abort: f64,
    /// Project `(g, G)` back to unit norm after every step.
    pub project_norm: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            sample_dt: 0.1,
            drift_abort: 1e-6,
            project_norm: false,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            control: StepControl::with_tol(tol),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(SimError::invalid("sample_dt", "must be positive"));
        }
        if !(self.drift_abort > 0.0) {
            return Err(SimError::invalid("drift_abort", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    pub state: AtomState,
    /// Instantaneous energy (conserved only for a constant field).
    pub energy: f64,
    pub norm: f64,
    pub u: f64,
}

impl Sample {
    fn new(tau: f64, state: AtomState, params: &SimParams) -> Self {
        Self {
            tau,
            state,
            energy: energy_at(&state, params, tau),
            norm: state.norm(),
            u: interaction_energy(&state),
        }
    }
}

/// Largest deviation of each monitored invariant over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub norm: f64,
    /// `None` when the field is time dependent.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SimParams,
    pub samples: Vec<Sample>,
    pub drift: Drift,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn final_state(&self) -> AtomState {
        self.samples.last().expect("trajectory has samples").state
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.tau)
    }
}

struct Monitor {
    params: SimParams,
    e0: f64,
    abort: f64,
    drift: Drift,
}

impl Monitor {
    fn new(state0: &AtomState, params: &SimParams, abort: f64) -> Self {
        let constant = params.profile.is_constant();
        Self {
            params: *params,
            e0: energy(state0, params),
            abort,
            drift: Drift {
                norm: (state0.norm() - 1.0).abs(),
                energy: constant.then_some(0.0),
            },
        }
    }

    fn check(&mut self, tau: f64, state: &AtomState) -> Result<()> {
        let dn = (state.norm() - 1.0).abs();
        self.drift.norm = self.drift.norm.max(dn);
        if !(dn <= self.abort) {
            return Err(SimError::InvariantDrift {
                invariant: "norm",
                drift: dn,
                threshold: self.abort,
                t: tau,
            });
        }
        if let Some(e) = self.drift.energy.as_mut() {
            let de = (energy(state, &self.params) - self.e0).abs();
            *e = e.max(de);
            if !(de <= self.abort) {
                return Err(SimError::InvariantDrift {
                    invariant: "energy",
                    drift: de,
                    threshold: self.abort,
                    t: tau,
                });
            }
        }
        Ok(())
    }
}

fn check_inputs(state0: &AtomState, params: &SimParams, tau_end: f64, opts: &IntegratorOptions) -> Result<()> {
    params.validate()?;
    opts.validate()?;
    if !state0.is_finite() {
        return Err(SimError::NonFinite("initial state"));
    }
    if !(tau_end >= 0.0 && tau_end.is_finite()) {
        return Err(SimError::invalid("tau_end", format!("must be finite and >= 0, got {tau_end}")));
    }
    let defect = (state0.norm() - 1.0).abs();
    if defect > INITIAL_NORM_TOL {
        return Err(SimError::invalid(
            "state0",
            format!("|g|^2 + |G|^2 deviates from 1 by {defect:e}"),
        ));
    }
    Ok(())
}

/// Core driver: integrate and hand every sample on a uniform grid to `on_sample`.
fn drive(
    state0: &AtomState,
    params: &SimParams,
    tau_end: f64,
    opts: &IntegratorOptions,
    sample_dt: Option<f64>,
    mut on_sample: impl FnMut(f64, AtomState),
) -> Result<(AtomState, Drift, RunStats)> {
    check_inputs(state0, params, tau_end, opts)?;
    let sys = AtomSystem { params: *params };
    let mut stepper = Dop853::new(&sys, 0.0, state0.to_array(), opts.control)?;
    let mut monitor = Monitor::new(state0, params, opts.drift_abort);

    let n_samples = sample_dt.map_or(0, |dt| (tau_end / dt + 1e-9).floor() as usize);
    if sample_dt.is_some() {
        on_sample(0.0, *state0);
    }
    let mut next = 1usize;
    while stepper.t() < tau_end {
        stepper.step(tau_end)?;
        let t_now = stepper.t();
        if let Some(dt) = sample_dt {
            while next <= n_samples && (next as f64) * dt <= t_now {
                let t = next as f64 * dt;
                let y = if t == t_now { *stepper.y() } else { stepper.dense(t) };
                let sample = AtomState::from_array(&y);
                monitor.check(t, &sample)?;
                on_sample(t, sample);
                next += 1;
            }
        }
        let mut state = AtomState::from_array(stepper.y());
        if opts.project_norm {
            state = state.normalized();
            stepper.reset_state(state.to_array());
        }
        monitor.check(t_now, &state)?;
    }
    if let Some(dt) = sample_dt {
        // Off-grid end point.
        let last_grid = n_samples as f64 * dt;
        if tau_end > last_grid * (1.0 + 1e-12) && tau_end > 0.0 {
            on_sample(tau_end, AtomState::from_array(stepper.y()));
        }
    }
    let stats = RunStats {
        accepted_steps: stepper.accepted_steps(),
        rejected_steps: stepper.rejected_steps(),
        rhs_evaluations: stepper.rhs_evaluations(),
    };
    Ok((AtomState::from_array(stepper.y()), monitor.drift, stats))
}

/// Integrate from `state0` to `tau_end`, sampling uniformly every
/// `opts.sample_dt` with the invariants recorded alongside each sample.
pub fn integrate(
    state0: &AtomState,
    params: &SimParams,
    tau_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let mut samples = Vec::with_capacity((tau_end / opts.sample_dt).max(0.0) as usize + 2);
    let (_, drift, stats) = drive(state0, params, tau_end, opts, Some(opts.sample_dt), |t, s| {
        samples.push(Sample::new(t, s, params))
    })?;
    Ok(Trajectory {
        params: *params,
        samples,
        drift,
        stats,
    })
}

/// Integrate to `tau_end` keeping only the final state.
pub fn propagate(
    state0: &AtomState,
    params: &SimParams,
    tau_end: f64,
    opts: &IntegratorOptions,
) -> Result<(AtomState, Drift)> {
    let (s, d, _) = drive(state0, params, tau_end, opts, None, |_, _| {})?;
    Ok((s, d))
}

/// Integrate and stream samples to a callback instead of storing them.
pub fn integrate_with(
    state0: &AtomState,
    params: &SimParams,
    tau_end: f64,
    opts: &IntegratorOptions,
    on_sample: impl FnMut(f64, AtomState),
) -> Result<(AtomState, Drift, RunStats)> {
    drive(state0, params, tau_end, opts, Some(opts.sample_dt), on_sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialRegime {
    Ballistic,
    Walking,
    Trapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeEstimate {
    pub regime: InitialRegime,
    pub kinetic: f64,
    pub energy: f64,
}

/// Small-detuning energy estimate of the motion type from the initial state:
/// ballistic when the kinetic energy exceeds the maximal potential depth 1,
/// trapped when the total energy is negative, walking otherwise.
pub fn initial_regime_estimate(state0: &AtomState, params: &SimParams) -> RegimeEstimate {
    let kinetic = 0.5 * params.omega_r * state0.p * state0.p;
    let h0 = energy(state0, params);
    let regime = if kinetic > 1.0 {
        InitialRegime::Ballistic
    } else if h0 < 0.0 {
        InitialRegime::Trapped
    } else {
        InitialRegime::Walking
    };
    RegimeEstimate {
        regime,
        kinetic,
        energy: h0,
    }
}

/// Smallest initial momentum for which a ground-state atom flies ballistically.
pub fn ballistic_threshold(omega_r: f64) -> f64 {
    (2.0 / omega_r).sqrt()
}

/// Flight time between adjacent standing-wave nodes, `π/(ω_r p)`.
pub fn node_flight_time(omega_r: f64, p: f64) -> f64 {
    std::f64::consts::PI / (omega_r * p)
}

/// Closed-form solutions used as oracles.
pub mod analytic {
    use super::*;

    /// Exact resonant (`Δ = 0`) motion from a ground-state start at `(x0, p0)`:
    /// `u ≡ 0` so `p ≡ p0`, `x = x0 + ω_r p0 τ`, `g = cos θ`, `G = i sin θ`
    /// with `θ' = cos x`.
    pub fn resonance_state(x0: f64, p0: f64, omega_r: f64, tau: f64) -> AtomState {
        let v = omega_r * p0;
        let theta = if v == 0.0 {
            tau * x0.cos()
        } else {
            ((x0 + v * tau).sin() - x0.sin()) / v
        };
        AtomState {
            x: x0 + v * tau,
            p: p0,
            g: Complex64::new(theta.cos(), 0.0),
            big_g: Complex64::new(0.0, theta.sin()),
        }
    }

    /// Excited population `|G(τ)|²` for a frozen atom (`ω_r = 0`) at `x0`
    /// starting in the ground state: a Rabi cycle at `ω̃ = √(Δ²/4 + cos²x0)`.
    pub fn frozen_excited_population(x0: f64, delta: f64, tau: f64) -> f64 {
        let c2 = x0.cos().powi(2);
        let w = (0.25 * delta * delta + c2).sqrt();
        if w == 0.0 {
            return 0.0;
        }
        c2 / (w * w) * (w * tau).sin().powi(2)
    }
}
