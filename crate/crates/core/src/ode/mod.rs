//! Adaptive Dormand–Prince 8(5,3) integrator with 7th-order dense output.
//!
//! The stepper works on fixed-size real states `[f64; N]`. Callers drive it
//! one accepted step at a time and interpolate inside the last step with
//! [`Dop853::dense`], which keeps sampling grids independent of the
//! adaptive step sequence.

mod dop853_coeffs;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use dop853_coeffs::{A, B, BHH, C, D, E};
/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]);
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]),
{
    fn rhs(&self, t: f64, y: &[f64; N], dy: &mut [f64; N]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `f64::INFINITY` for none.
    pub h_max: f64,
    /// Initial step; `None` selects one automatically.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: 1.0,
            h_init: None,
            max_steps: 50_000_000,
        }
    }
}

impl StepControl {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return Err(SimError::invalid("rtol", format!("must be positive, got {}", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(SimError::invalid("atol", format!("must be positive, got {}", self.atol)));
        }
        if !(self.h_max > 0.0) {
            return Err(SimError::invalid("h_max", "must be positive"));
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0 && h.is_finite()) {
                return Err(SimError::invalid("h_init", "must be positive and finite"));
            }
        }
        Ok(())
    }
}

const SAFETY: f64 = 0.9;
// Bounds on h_new/h.
const FAC_MIN: f64 = 1.0 / 3.0;
const FAC_MAX: f64 = 6.0;

/// Adaptive DOP853 stepper.
pub struct Dop853<'a, S, const N: usize> {
    sys: &'a S,
    ctrl: StepControl,
    t: f64,
    y: [f64; N],
    /// f(t, y), reused across steps (FSAL).
    f0: [f64; N],
    h: f64,
    t_old: f64,
    h_last: f64,
    cont: [[f64; N]; 8],
    last_rejected: bool,
    steps: usize,
    rejected: usize,
    evals: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> Dop853<'a, S, N> {
    pub fn new(sys: &'a S, t0: f64, y0: [f64; N], ctrl: StepControl) -> Result<Self> {
        ctrl.validate()?;
        if !t0.is_finite() || y0.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite("initial state"));
        }
        let mut f0 = [0.0; N];
        sys.rhs(t0, &y0, &mut f0);
        let mut s = Self {
            sys,
            ctrl,
            t: t0,
            y: y0,
            f0,
            h: 0.0,
            t_old: t0,
            h_last: 0.0,
            cont: [[0.0; N]; 8],
            last_rejected: false,
            steps: 0,
            rejected: 0,
            evals: 1,
        };
        s.cont[0] = y0;
        s.h = match ctrl.h_init {
            Some(h) => h.min(ctrl.h_max),
            None => s.initial_step(),
        };
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn rhs_evaluations(&self) -> usize {
        self.evals
    }

    /// Replace the current state (e.g. after a renormalization) without
    /// moving in time. Invalidates dense output of the previous step.
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.sys.rhs(self.t, &self.y, &mut self.f0);
        self.evals += 1;
        self.cont = [[0.0; N]; 8];
        self.cont[0] = y;
        self.t_old = self.t;
        self.h_last = 0.0;
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.ctrl.atol + self.ctrl.rtol * a.abs().max(b.abs())
    }

    // Hairer's starting-step heuristic for an order-8 method.
    fn initial_step(&mut self) -> f64 {
        let n = N as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.f0[i] / sk).powi(2);
        }
        d0 = (d0 / n).sqrt();
        d1 = (d1 / n).sqrt();
        let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.ctrl.h_max);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + h0 * self.f0[i];
        }
        let mut f1 = [0.0; N];
        self.sys.rhs(self.t + h0, &y1, &mut f1);
        self.evals += 1;
        let mut d2 = 0.0;
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            d2 += ((f1[i] - self.f0[i]) / sk).powi(2);
        }
        d2 = (d2 / n).sqrt() / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(self.ctrl.h_max)
    }

    /// Take one accepted step, never passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let sys = self.sys;
        loop {
            if self.steps + self.rejected >= self.ctrl.max_steps {
                return Err(SimError::TooManySteps(self.ctrl.max_steps));
            }
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Ok(());
            }
            let mut h = self.h.min(self.ctrl.h_max);
            let last = h * 1.01 >= remaining;
            if last {
                h = remaining;
            }
            if 0.1 * h <= f64::EPSILON * self.t.abs() {
                return Err(SimError::StepSizeUnderflow { t: self.t, h });
            }

            let t = self.t;
            let y = self.y;
            let mut k = [[0.0; N]; 16];
            k[0] = self.f0;
            let mut tmp = [0.0; N];
            for s in 1..12 {
                for i in 0..N {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * k[j][i];
                    }
                    tmp[i] = y[i] + h * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                sys.rhs(t + C[s] * h, &tmp, &mut tail[0]);
            }
            self.evals += 11;

            let mut y_new = [0.0; N];
            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..N {
                let mut incr = 0.0;
                let mut est = 0.0;
                for j in 0..12 {
                    incr += B[j] * k[j][i];
                    est += E[j] * k[j][i];
                }
                y_new[i] = y[i] + h * incr;
                let bhh = incr - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
                let sk = self.scale(y[i], y_new[i]);
                err += (est / sk).powi(2);
                err2 += (bhh / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();

            if !err.is_finite() {
                self.rejected += 1;
                self.last_rejected = true;
                self.h = h * FAC_MIN;
                continue;
            }

            let fac11 = err.powf(1.0 / 8.0);
            // h_new = h / fac, fac bounded to [1/FAC_MAX, 1/FAC_MIN].
            let fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);

            if err <= 1.0 {
                let mut f_new = [0.0; N];
                sys.rhs(t + h, &y_new, &mut f_new);
                k[12] = f_new;
                for (s, cs) in [(13usize, C[13]), (14, C[14]), (15, C[15])] {
                    for i in 0..N {
                        let mut acc = 0.0;
                        for j in 0..s {
                            acc += A[s][j] * k[j][i];
                        }
                        tmp[i] = y[i] + h * acc;
                    }
                    let (_, tail) = k.split_at_mut(s);
                    sys.rhs(t + cs * h, &tmp, &mut tail[0]);
                }
                self.evals += 4;

                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * f_new[i] - bspl;
                    for (r, drow) in D.iter().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..16 {
                            acc += drow[j] * k[j][i];
                        }
                        self.cont[4 + r][i] = h * acc;
                    }
                }

                self.t_old = t;
                self.h_last = h;
                self.t = if last { t_limit } else { t + h };
                self.y = y_new;
                self.f0 = f_new;
                self.steps += 1;
                if !last {
                    let mut h_new = h / fac;
                    if self.last_rejected {
                        h_new = h_new.min(h);
                    }
                    self.h = h_new;
                }
                self.last_rejected = false;
                return Ok(());
            }
            self.rejected += 1;
            self.last_rejected = true;
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }

    /// Interpolate the solution at `t` within the last accepted step.
    pub fn dense(&self, t: f64) -> [f64; N] {
        if self.h_last == 0.0 {
            return self.y;
        }
        let s = (t - self.t_old) / self.h_last;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i]
                + s * (c[1][i]
                    + s1 * (c[2][i]
                        + s * (c[3][i]
                            + s1 * (c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]))))));
        }
        out
    }

    /// Start time of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    /// Integrate until `t_end`, returning the final state.
    pub fn advance_to(&mut self, t_end: f64) -> Result<[f64; N]> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sys = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0];
        let mut st = Dop853::new(&sys, 0.0, [1.0], StepControl::with_tol(1e-12)).unwrap();
        let y = st.advance_to(5.0).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert_eq!(st.t(), 5.0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sys = |_t: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut st = Dop853::new(&sys, 0.0, [1.0, 0.0], StepControl::with_tol(1e-11)).unwrap();
        let mut worst: f64 = 0.0;
        while st.t() < 20.0 {
            st.step(20.0).unwrap();
            let (a, b) = (st.t_prev(), st.t());
            for k in 0..=8 {
                let t = a + (b - a) * k as f64 / 8.0;
                let y = st.dense(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
            }
        }
        assert!(worst < 1e-9, "dense output error {worst:e}");
    }

    #[test]
    fn lands_exactly_on_target() {
        let sys = |_t: f64, _y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = 1.0;
        let mut st = Dop853::new(&sys, 0.0, [0.0], StepControl::default()).unwrap();
        let y = st.advance_to(3.3).unwrap();
        assert_eq!(st.t(), 3.3);
        assert!((y[0] - 3.3).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_tolerance_and_nan_state() {
        let sys = |_t: f64, _y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = 0.0;
        assert!(Dop853::new(&sys, 0.0, [0.0], StepControl::with_tol(-1.0)).is_err());
        assert!(matches!(
            Dop853::new(&sys, 0.0, [f64::NAN], StepControl::default()),
            Err(SimError::NonFinite(_))
        ));
    }

    #[test]
    fn max_steps_reported() {
        let sys = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0].cos();
        let ctrl = StepControl {
            max_steps: 3,
            h_max: 0.01,
            ..StepControl::default()
        };
        let mut st = Dop853::new(&sys, 0.0, [0.0], ctrl).unwrap();
        assert!(matches!(st.advance_to(10.0), Err(SimError::TooManySteps(3))));
    }
}
