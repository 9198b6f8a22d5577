//! Maximum Lyapunov exponent, (Δ, p₀) chaos maps and predictability time.
//!
//! The default method propagates the linearized (tangent) flow next to the
//! trajectory and renormalizes a single tangent vector at fixed intervals.
//! A two-trajectory method with a small finite separation is kept as an
//! independent cross-check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs_raw, AtomState, SimParams, INITIAL_NORM_TOL};
use crate::error::{Result, SimError};
use crate::ode::{Dop853, OdeSystem, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMethod {
    /// Exact tangent equations in the six real coordinates.
    Variational,
    /// Two nearby trajectories with renormalized separation.
    TwoTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    pub method: LyapunovMethod,
    pub control: StepControl,
    /// Time between tangent-vector renormalizations.
    pub renorm_interval: f64,
    /// Initial separation for the two-trajectory method.
    pub separation: f64,
    /// Relative tolerance between the estimates at 3/4 and at the full run.
    pub rel_tol: f64,
    /// Estimates below this magnitude count as converged to zero.
    pub abs_tol: f64,
    /// Spacing of the recorded running estimates.
    pub record_every: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            method: LyapunovMethod::Variational,
            control: StepControl::default(),
            renorm_interval: 1.0,
            separation: 1e-8,
            rel_tol: 0.05,
            abs_tol: 1e-3,
            record_every: 100.0,
        }
    }
}

impl LyapunovOptions {
    pub fn two_trajectory() -> Self {
        Self {
            method: LyapunovMethod::TwoTrajectory,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        if !(self.renorm_interval > 0.0 && self.renorm_interval.is_finite()) {
            return Err(SimError::invalid("renorm_interval", "must be positive"));
        }
        if !(self.separation > 0.0 && self.separation < 1.0) {
            return Err(SimError::invalid("separation", "must lie in (0, 1)"));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(SimError::invalid("rel_tol", "tolerances must be positive"));
        }
        if !(self.record_every > 0.0 && self.record_every.is_finite()) {
            return Err(SimError::invalid("record_every", "must be positive"));
        }
        Ok(())
    }
}

/// One recorded running estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningEstimate {
    pub tau: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub lambda: f64,
    pub tau_total: f64,
    pub convergence_series: Vec<RunningEstimate>,
    pub converged: bool,
    pub method: LyapunovMethod,
}

struct Tangent {
    params: SimParams,
}

impl OdeSystem<12> for Tangent {
    #[inline]
    fn rhs(&self, t: f64, y: &[f64; 12], dy: &mut [f64; 12]) {
        let p = &self.params;
        let f = p.profile.amplitude(t);
        let (base, rest) = dy.split_at_mut(6);
        let state: &[f64; 6] = y[..6].try_into().unwrap();
        rhs_raw(p.omega_r, p.delta, f, state, base.try_into().unwrap());

        let v = &y[6..];
        let (s, c) = y[0].sin_cos();
        let (g1, g2, b1, b2) = (y[2], y[3], y[4], y[5]);
        let u = 2.0 * (g1 * b1 + g2 * b2);
        let fs = f * s;
        let fc = f * c;
        rest[0] = p.omega_r * v[1];
        rest[1] = fc * u * v[0] + 2.0 * fs * (b1 * v[2] + b2 * v[3] + g1 * v[4] + g2 * v[5]);
        rest[2] = fs * b2 * v[0] - fc * v[5];
        rest[3] = -fs * b1 * v[0] + fc * v[4];
        rest[4] = fs * g2 * v[0] - fc * v[3] + p.delta * v[5];
        rest[5] = -fs * g1 * v[0] + fc * v[2] - p.delta * v[4];
    }
}

struct Pair {
    params: SimParams,
}

impl OdeSystem<12> for Pair {
    #[inline]
    fn rhs(&self, t: f64, y: &[f64; 12], dy: &mut [f64; 12]) {
        let p = &self.params;
        let f = p.profile.amplitude(t);
        let (a, b) = dy.split_at_mut(6);
        rhs_raw(p.omega_r, p.delta, f, y[..6].try_into().unwrap(), a.try_into().unwrap());
        rhs_raw(p.omega_r, p.delta, f, y[6..].try_into().unwrap(), b.try_into().unwrap());
    }
}

fn norm6(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn check_inputs(state0: &AtomState, params: &SimParams, tau_total: f64, opts: &LyapunovOptions) -> Result<()> {
    params.validate()?;
    opts.validate()?;
    if !state0.is_finite() {
        return Err(SimError::NonFinite("initial state"));
    }
    let defect = (state0.norm() - 1.0).abs();
    if defect > INITIAL_NORM_TOL {
        return Err(SimError::NotNormalized(defect));
    }
    if !(tau_total > 0.0 && tau_total.is_finite()) {
        return Err(SimError::invalid("tau_total", "must be positive"));
    }
    if tau_total < opts.renorm_interval {
        return Err(SimError::invalid("tau_total", "shorter than one renormalization interval"));
    }
    Ok(())
}

/// Estimate the maximum Lyapunov exponent from `state0` over `tau_total`.
pub fn max_lyapunov(
    state0: &AtomState,
    params: &SimParams,
    tau_total: f64,
    opts: &LyapunovOptions,
) -> Result<LyapunovResult> {
    check_inputs(state0, params, tau_total, opts)?;
    let base = state0.to_array();
    let mut y0 = [0.0; 12];
    y0[..6].copy_from_slice(&base);
    let dir = 1.0 / 6f64.sqrt();
    match opts.method {
        LyapunovMethod::Variational => {
            for v in &mut y0[6..] {
                *v = dir;
            }
            let sys = Tangent { params: *params };
            run(&sys, y0, tau_total, opts, |y| {
                let n = norm6(&y[6..]);
                for v in &mut y[6..] {
                    *v /= n;
                }
                n.ln()
            })
        }
        LyapunovMethod::TwoTrajectory => {
            let d0 = opts.separation;
            for i in 0..6 {
                y0[6 + i] = base[i] + d0 * dir;
            }
            let sys = Pair { params: *params };
            run(&sys, y0, tau_total, opts, |y| {
                let mut diff = [0.0; 6];
                for i in 0..6 {
                    diff[i] = y[6 + i] - y[i];
                }
                let d = norm6(&diff);
                for i in 0..6 {
                    y[6 + i] = y[i] + diff[i] * (d0 / d);
                }
                (d / d0).ln()
            })
        }
    }
}

fn run<S: OdeSystem<12>>(
    sys: &S,
    y0: [f64; 12],
    tau_total: f64,
    opts: &LyapunovOptions,
    mut renormalize: impl FnMut(&mut [f64; 12]) -> f64,
) -> Result<LyapunovResult> {
    let mut stepper = Dop853::new(sys, 0.0, y0, opts.control)?;
    let n_intervals = (tau_total / opts.renorm_interval).round().max(1.0) as usize;
    let dt = tau_total / n_intervals as f64;
    let record_stride = ((opts.record_every / dt).round() as usize).max(1);
    let check_at = (3 * n_intervals) / 4;

    let mut log_sum = 0.0;
    let mut series = Vec::with_capacity(n_intervals / record_stride + 2);
    let mut at_three_quarters = None;
    for k in 1..=n_intervals {
        let t = if k == n_intervals { tau_total } else { k as f64 * dt };
        let mut y = stepper.advance_to(t)?;
        let stretch = renormalize(&mut y);
        if !stretch.is_finite() {
            return Err(SimError::NonFinite("tangent vector"));
        }
        log_sum += stretch;
        stepper.reset_state(y);
        let estimate = log_sum / t;
        if k % record_stride == 0 || k == n_intervals {
            series.push(RunningEstimate { tau: t, lambda: estimate });
        }
        if k == check_at {
            at_three_quarters = Some(estimate);
        }
    }
    let lambda = log_sum / tau_total;
    let converged = lambda.abs() < opts.abs_tol
        || at_three_quarters
            .map(|prev| (lambda - prev).abs() <= opts.rel_tol * lambda.abs())
            .unwrap_or(false);
    Ok(LyapunovResult {
        lambda,
        tau_total,
        convergence_series: series,
        converged,
        method: opts.method,
    })
}

/// Evenly spaced axis `start..=end` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(start: f64, end: f64, count: usize) -> Self {
        Self { start, end, count }
    }

    /// A single-point axis.
    pub fn point(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(SimError::invalid(name, "range bounds must be finite"));
        }
        match self.count {
            0 => Err(SimError::invalid(name, "needs at least one point")),
            1 if self.start != self.end => Err(SimError::invalid(
                name,
                "a non-degenerate range needs at least two points",
            )),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.end } else { self.start + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub lambda: Option<f64>,
    pub converged: bool,
}

/// Grid of exponents; `cells[i][j]` belongs to `delta_axis[i]`, `p0_axis[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosMap {
    pub delta_axis: Vec<f64>,
    pub p0_axis: Vec<f64>,
    pub cells: Vec<Vec<MapCell>>,
    pub params: SimParams,
    pub x0: f64,
    pub tau_total: f64,
    pub options: LyapunovOptions,
}

impl ChaosMap {
    pub fn lambda(&self, i_delta: usize, i_p0: usize) -> Option<f64> {
        self.cells[i_delta][i_p0].lambda
    }

    pub fn missing(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.lambda.is_none()).count()
    }

    pub fn max_lambda(&self) -> Option<f64> {
        self.cells
            .iter()
            .flatten()
            .filter_map(|c| c.lambda)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Parallel,
    Sequential,
}

/// Sweep ground-state atoms starting at `x0` over a (Δ, p₀) grid. The
/// `delta` in `params` is ignored. Cells whose integration fails are stored
/// as missing.
pub fn lyapunov_map(
    delta_range: AxisRange,
    p0_range: AxisRange,
    params: &SimParams,
    x0: f64,
    tau_total: f64,
    opts: &LyapunovOptions,
    schedule: Schedule,
) -> Result<ChaosMap> {
    delta_range.validate("delta_range")?;
    p0_range.validate("p0_range")?;
    params.validate()?;
    opts.validate()?;
    if !x0.is_finite() {
        return Err(SimError::NonFinite("x0"));
    }
    let deltas = delta_range.values();
    let p0s = p0_range.values();
    let n_p = p0s.len();
    let cell = |idx: usize| {
        let params = SimParams {
            delta: deltas[idx / n_p],
            ..*params
        };
        let state = AtomState::ground(x0, p0s[idx % n_p]);
        match max_lyapunov(&state, &params, tau_total, opts) {
            Ok(r) => MapCell {
                lambda: Some(r.lambda),
                converged: r.converged,
            },
            Err(_) => MapCell {
                lambda: None,
                converged: false,
            },
        }
    };
    let total = deltas.len() * n_p;
    let flat: Vec<MapCell> = match schedule {
        Schedule::Parallel => (0..total).into_par_iter().map(cell).collect(),
        Schedule::Sequential => (0..total).map(cell).collect(),
    };
    let cells = flat.chunks(n_p).map(<[MapCell]>::to_vec).collect();
    Ok(ChaosMap {
        delta_axis: deltas,
        p0_axis: p0s,
        cells,
        params: *params,
        x0,
        tau_total,
        options: *opts,
    })
}

/// Horizon `(1/λ) ln(Δx/Δx₀)` beyond which a forecast with initial
/// uncertainty `dx0` exceeds `dx_confidence`.
pub fn predictability_time(lambda: f64, dx_confidence: f64, dx0: f64) -> Result<f64> {
    if !lambda.is_finite() || !dx_confidence.is_finite() || !dx0.is_finite() {
        return Err(SimError::NonFinite("predictability input"));
    }
    if lambda <= 0.0 {
        return Err(SimError::NonPositiveLyapunov(lambda));
    }
    if !(dx0 > 0.0) {
        return Err(SimError::invalid("dx0", "must be positive"));
    }
    if dx_confidence < dx0 {
        return Err(SimError::invalid("dx_confidence", "must be at least dx0"));
    }
    Ok((dx_confidence / dx0).ln() / lambda)
}
