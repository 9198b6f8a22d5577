//! SU(2) group-parameter algebra for a driven two-level system.
//!
//! A group element is written in the noncanonical ordered-exponential form
//! `exp[(g0 - i∫h0) R0] exp(g₋ R₋) exp(g₊ R₊)`. The whole element is fixed by
//! the complex pair `(g, g̃)` with `g = exp(g0/2)` and `g̃ = g₋/g`, and the
//! driven dynamics reduce to one second-order ODE for `g`:
//!
//! ```text
//! g'' - (Ω'/Ω + i ω_a) g' + |Ω|² g = 0,   g(0) = 1, g'(0) = 0
//! ```
//!
//! which is integrated here as the first-order pair `(g, g')`.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::ode::{Dop853, OdeSystem, StepControl};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `|g|² + |g̃|² - 1` accepted by [`representation_matrix`].
pub const PAIR_NORM_TOL: f64 = 1e-8;

/// Default `|g|` below which `g₊` reconstruction is refused.
pub const DEFAULT_EPS_G: f64 = 1e-6;

/// Magnitude below which the driving amplitude counts as zero.
const DRIVE_ZERO: f64 = 1e-12;

/// Largest supported `2j`; factorials stay exact enough in f64 well beyond it.
pub const MAX_TWO_J: u32 = 100;

/// The complex pair `(g, g̃)` describing an SU(2) element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPair {
    pub g: Complex64,
    pub g_tilde: Complex64,
}

impl GroupPair {
    pub const IDENTITY: GroupPair = GroupPair {
        g: Complex64::new(1.0, 0.0),
        g_tilde: Complex64::new(0.0, 0.0),
    };

    pub fn new(g: Complex64, g_tilde: Complex64) -> Self {
        Self { g, g_tilde }
    }

    /// `|g|² + |g̃|² - 1`.
    pub fn norm_defect(&self) -> f64 {
        self.g.norm_sqr() + self.g_tilde.norm_sqr() - 1.0
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.norm_defect().abs() <= tol
    }

    /// The defining 2×2 matrix `[[g, -g̃*], [g̃, g*]]`.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.g, -self.g_tilde.conj()], [self.g_tilde, self.g.conj()]]
    }

    /// Group product, read off the first column of the matrix product.
    pub fn compose(&self, other: &GroupPair) -> GroupPair {
        let a = self.matrix();
        let b = other.matrix();
        GroupPair {
            g: a[0][0] * b[0][0] + a[0][1] * b[1][0],
            g_tilde: a[1][0] * b[0][0] + a[1][1] * b[1][0],
        }
    }
}

/// Secondary group parameters recovered from a solved `g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedParams {
    pub t: f64,
    pub g_minus: Complex64,
    pub g_plus: Complex64,
    pub g0: Complex64,
}

/// A time-dependent complex driving amplitude Ω(t) with its derivative.
pub trait Drive: Send + Sync {
    fn amplitude(&self, t: f64) -> Complex64;
    fn derivative(&self, t: f64) -> Complex64;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantDrive(pub Complex64);

impl Drive for ConstantDrive {
    fn amplitude(&self, _t: f64) -> Complex64 {
        self.0
    }
    fn derivative(&self, _t: f64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

/// `peak · exp[-(t - center)² / width²]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPulse {
    pub peak: f64,
    pub center: f64,
    pub width: f64,
}

impl Drive for GaussianPulse {
    fn amplitude(&self, t: f64) -> Complex64 {
        let s = (t - self.center) / self.width;
        Complex64::new(self.peak * (-s * s).exp(), 0.0)
    }
    fn derivative(&self, t: f64) -> Complex64 {
        let s = (t - self.center) / self.width;
        Complex64::new(-2.0 * s / self.width * self.peak * (-s * s).exp(), 0.0)
    }
}

/// Drive given by a pair of closures (amplitude, derivative).
pub struct FnDrive<A, D> {
    pub amplitude: A,
    pub derivative: D,
}

impl<A, D> Drive for FnDrive<A, D>
where
    A: Fn(f64) -> Complex64 + Send + Sync,
    D: Fn(f64) -> Complex64 + Send + Sync,
{
    fn amplitude(&self, t: f64) -> Complex64 {
        (self.amplitude)(t)
    }
    fn derivative(&self, t: f64) -> Complex64 {
        (self.derivative)(t)
    }
}

/// Two-level Hamiltonian `½ω_a σ_z + Ω*(t) σ₋ + Ω(t) σ₊`.
#[derive(Clone)]
pub struct DrivingSpec {
    pub omega_a: f64,
    pub drive: Arc<dyn Drive>,
}

impl fmt::Debug for DrivingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DrivingSpec")
            .field("omega_a", &self.omega_a)
            .field("omega(0)", &self.drive.amplitude(0.0))
            .finish()
    }
}

impl DrivingSpec {
    pub fn constant(omega_a: f64, omega: Complex64) -> Self {
        Self {
            omega_a,
            drive: Arc::new(ConstantDrive(omega)),
        }
    }

    pub fn new(omega_a: f64, drive: impl Drive + 'static) -> Self {
        Self {
            omega_a,
            drive: Arc::new(drive),
        }
    }

    /// `∫₀ᵗ h0 dτ`, the accumulated diagonal phase.
    pub fn phase(&self, t: f64) -> f64 {
        self.omega_a * t
    }

    /// `(g, g̃)` from `(g, g')` at time `t`: `g̃ = i g' e^{-iω_a t} / Ω(t)`.
    pub fn pair_at(&self, t: f64, g: Complex64, g_dot: Complex64) -> GroupPair {
        let omega = self.drive.amplitude(t);
        let g_tilde = I * g_dot * Complex64::from_polar(1.0, -self.phase(t)) / omega;
        GroupPair { g, g_tilde }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSample {
    pub t: f64,
    pub g: Complex64,
    pub g_dot: Complex64,
}

#[derive(Debug, Clone)]
pub struct TwoLevelSolution {
    pub samples: Vec<TwoLevelSample>,
    /// Largest `| |g|²+|g̃|² - 1 |` over the samples.
    pub max_norm_defect: f64,
}

impl TwoLevelSolution {
    pub fn pairs(&self, spec: &DrivingSpec) -> Vec<GroupPair> {
        self.samples
            .iter()
            .map(|s| spec.pair_at(s.t, s.g, s.g_dot))
            .collect()
    }
}

struct TwoLevelSystem<'a> {
    spec: &'a DrivingSpec,
    zero_hit: Cell<Option<(f64, f64)>>,
}

impl OdeSystem<4> for TwoLevelSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 4], dy: &mut [f64; 4]) {
        let g = Complex64::new(y[0], y[1]);
        let gd = Complex64::new(y[2], y[3]);
        let omega = self.spec.drive.amplitude(t);
        let mag = omega.norm();
        if mag <= DRIVE_ZERO {
            if self.zero_hit.get().is_none() {
                self.zero_hit.set(Some((t, mag)));
            }
            *dy = [0.0; 4];
            return;
        }
        let coeff = self.spec.drive.derivative(t) / omega + I * self.spec.omega_a;
        let gdd = coeff * gd - omega.norm_sqr() * g;
        *dy = [gd.re, gd.im, gdd.re, gdd.im];
    }
}

/// Integrate the driven two-level group equation from `g(0)=1, g'(0)=0`
/// to `t_end`, sampling every `sample_dt`.
pub fn solve_two_level(
    spec: &DrivingSpec,
    t_end: f64,
    tol: f64,
    sample_dt: f64,
) -> Result<TwoLevelSolution> {
    if !spec.omega_a.is_finite() {
        return Err(SimError::NonFinite("omega_a"));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(SimError::invalid("t_end", format!("must be finite and >= 0, got {t_end}")));
    }
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(SimError::invalid("sample_dt", "must be positive"));
    }
    let check_drive = |t: f64| -> Result<Complex64> {
        let w = spec.drive.amplitude(t);
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(SimError::NonFinite("driving amplitude"));
        }
        if w.norm() <= DRIVE_ZERO {
            return Err(SimError::DrivingZero { t, magnitude: w.norm() });
        }
        Ok(w)
    };
    let mut last_omega = check_drive(0.0)?;

    let sys = TwoLevelSystem {
        spec,
        zero_hit: Cell::new(None),
    };
    let mut stepper = Dop853::new(&sys, 0.0, [1.0, 0.0, 0.0, 0.0], StepControl::with_tol(tol))?;

    let n_samples = (t_end / sample_dt + 1e-9).floor() as usize;
    let mut samples = Vec::with_capacity(n_samples + 2);
    let mut max_defect: f64 = 0.0;
    let mut push = |t: f64, y: &[f64; 4], out: &mut Vec<TwoLevelSample>| {
        let s = TwoLevelSample {
            t,
            g: Complex64::new(y[0], y[1]),
            g_dot: Complex64::new(y[2], y[3]),
        };
        max_defect = max_defect.max(spec.pair_at(t, s.g, s.g_dot).norm_defect().abs());
        out.push(s);
    };
    push(0.0, &[1.0, 0.0, 0.0, 0.0], &mut samples);

    let mut next = 1;
    while stepper.t() < t_end {
        stepper.step(t_end)?;
        if let Some((t, magnitude)) = sys.zero_hit.get() {
            return Err(SimError::DrivingZero { t, magnitude });
        }
        let t_now = stepper.t();
        let omega = check_drive(t_now)?;
        // A sign flip of Ω between step ends means it passed through zero.
        if (omega * last_omega.conj()).re < 0.0 {
            return Err(SimError::DrivingZero {
                t: t_now,
                magnitude: omega.norm(),
            });
        }
        last_omega = omega;
        while next <= n_samples && (next as f64) * sample_dt <= t_now {
            let t = next as f64 * sample_dt;
            let y = stepper.dense(t);
            push(t, &y, &mut samples);
            next += 1;
        }
    }
    if samples.last().map(|s| s.t) != Some(t_end) && t_end > 0.0 {
        let y = *stepper.y();
        push(t_end, &y, &mut samples);
    }
    Ok(TwoLevelSolution {
        samples,
        max_norm_defect: max_defect,
    })
}

/// Recover `g₋`, `g₊` and `g0` along a solved series.
///
/// `g₋ = i g g' e^{-i∫ω_a} / Ω` is closed-form; `g₊` integrates
/// `dg₊/dt = -i Ω g⁻² e^{i∫ω_a}` with the endpoint-derivative corrected
/// trapezoid rule (fourth order on smooth integrands).
pub fn reconstruct_params(
    solution: &TwoLevelSolution,
    spec: &DrivingSpec,
    eps_g: f64,
) -> Result<Vec<ReconstructedParams>> {
    let samples = &solution.samples;
    if samples.is_empty() {
        return Err(SimError::EmptyInput("two-level series"));
    }
    let wa = spec.omega_a;
    let integrand = |s: &TwoLevelSample| -> Result<(Complex64, Complex64)> {
        let mag = s.g.norm();
        if mag <= eps_g {
            return Err(SimError::ParameterizationSingular {
                t: s.t,
                magnitude: mag,
                eps: eps_g,
            });
        }
        let omega = spec.drive.amplitude(s.t);
        let omega_dot = spec.drive.derivative(s.t);
        let ph = Complex64::from_polar(1.0, spec.phase(s.t));
        let inv_g2 = (s.g * s.g).inv();
        let f = -I * omega * inv_g2 * ph;
        let df = -I * ph * inv_g2 * (omega_dot - 2.0 * omega * s.g_dot / s.g + I * wa * omega);
        Ok((f, df))
    };

    let mut out = Vec::with_capacity(samples.len());
    let mut g_plus = Complex64::new(0.0, 0.0);
    let mut prev = integrand(&samples[0])?;
    let mut prev_t = samples[0].t;
    let mut arg_prev = samples[0].g.arg();
    let mut arg_acc = arg_prev;
    for (k, s) in samples.iter().enumerate() {
        let cur = integrand(s)?;
        if k > 0 {
            let h = s.t - prev_t;
            g_plus += 0.5 * h * (prev.0 + cur.0) + h * h / 12.0 * (prev.1 - cur.1);
            let a = s.g.arg();
            let mut d = a - arg_prev;
            d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            arg_acc += d;
            arg_prev = a;
        }
        let omega = spec.drive.amplitude(s.t);
        let g_minus = I * s.g * s.g_dot * Complex64::from_polar(1.0, -spec.phase(s.t)) / omega;
        let g0 = 2.0 * Complex64::new(s.g.norm().ln(), arg_acc);
        out.push(ReconstructedParams {
            t: s.t,
            g_minus,
            g_plus,
            g0,
        });
        prev = cur;
        prev_t = s.t;
    }
    Ok(out)
}

/// Spin label stored as `2j` so half-integers index exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spin {
    two_j: u32,
}

impl Spin {
    pub fn from_twice(two_j: u32) -> Result<Self> {
        if two_j > MAX_TWO_J {
            return Err(SimError::invalid("j", format!("2j = {two_j} exceeds {MAX_TWO_J}")));
        }
        Ok(Self { two_j })
    }

    pub fn from_j(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !j.is_finite() || j < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(SimError::invalid("j", format!("must be a nonnegative half-integer, got {j}")));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.two_j
    }

    pub fn j(self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.two_j as usize + 1
    }

    /// `2m` for row/column `k`; rows run `m = j, j-1, …, -j`.
    pub fn twice_m(self, k: usize) -> i64 {
        self.two_j as i64 - 2 * k as i64
    }
}

fn factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn cpow(z: Complex64, n: i64) -> Complex64 {
    debug_assert!(n >= 0);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        acc *= z;
    }
    acc
}

/// The factorial sum for one entry, without the `e^{-i m' φ}` phase.
/// All arguments are doubled; terms with negative factorial arguments vanish.
fn entry_sum(two_j: i64, two_mp: i64, two_m: i64, g: Complex64, gt: Complex64) -> Complex64 {
    let half = |v: i64| v / 2;
    let jm_p = half(two_j - two_mp);
    let jm = half(two_j - two_m);
    let jp_p = half(two_j + two_mp);
    let jp = half(two_j + two_m);
    let pref = (factorial(jm_p) * factorial(jm) / (factorial(jp_p) * factorial(jp))).sqrt();
    let n = half(two_m + two_mp);
    let neg_gt_conj = -gt.conj();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut two_l = -two_j;
    while two_l <= two_j {
        let l_minus_m = two_l - two_m;
        let l_minus_mp = two_l - two_mp;
        if l_minus_m >= 0 && l_minus_mp >= 0 {
            let (a, b) = (half(l_minus_mp), half(l_minus_m));
            let c = factorial(half(two_j + two_l))
                / (factorial(half(two_j - two_l)) * factorial(b) * factorial(a));
            let gpow = if n >= 0 { cpow(g, n) } else { cpow(g.inv(), -n) };
            sum += c * gpow * cpow(gt, a) * cpow(neg_gt_conj, b);
        }
        two_l += 2;
    }
    pref * sum
}

/// Representation matrix `U⁽ʲ⁾` of the element `(g, g̃)` with diagonal phase
/// `∫h0 dτ`. Row/column `k` corresponds to `m = j - k`, the order in which the
/// 2×2 evolution matrix is written for `j = 1/2`.
///
/// Entries with `m + m' < 0` carry negative powers of `g`; they are obtained
/// from the `(-m', -m)` entry through `U_{m'm} = (-1)^{m'-m} conj(U_{-m',-m})`,
/// which keeps the evaluation well conditioned as `|g| → 0`.
pub fn representation_matrix(spin: Spin, pair: &GroupPair, phase: f64) -> Result<DMatrix<Complex64>> {
    if !(pair.g.re.is_finite() && pair.g.im.is_finite() && pair.g_tilde.re.is_finite() && pair.g_tilde.im.is_finite()) {
        return Err(SimError::NonFinite("group pair"));
    }
    if !pair.is_normalized(PAIR_NORM_TOL) {
        return Err(SimError::NotNormalized(pair.norm_defect()));
    }
    if !phase.is_finite() {
        return Err(SimError::NonFinite("phase"));
    }
    let two_j = spin.twice() as i64;
    let dim = spin.dim();
    let mut u = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for r in 0..dim {
        let two_mp = spin.twice_m(r);
        for c in 0..dim {
            let two_m = spin.twice_m(c);
            let core = if two_m + two_mp >= 0 {
                entry_sum(two_j, two_mp, two_m, pair.g, pair.g_tilde)
            } else {
                let sign = if ((two_mp - two_m) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                sign * entry_sum(two_j, -two_mp, -two_m, pair.g, pair.g_tilde).conj()
            };
            let ph = Complex64::from_polar(1.0, -(two_mp as f64) / 2.0 * phase);
            u[(r, c)] = ph * core;
        }
    }
    Ok(u)
}

/// Explicit 2×2 evolution matrix `diag(e^{-iφ/2}, e^{iφ/2}) · [[g, -g̃*], [g̃, g*]]`.
pub fn evolution_matrix_half(pair: &GroupPair, phase: f64) -> [[Complex64; 2]; 2] {
    let m = pair.matrix();
    let a = Complex64::from_polar(1.0, -phase / 2.0);
    let b = Complex64::from_polar(1.0, phase / 2.0);
    [[a * m[0][0], a * m[0][1]], [b * m[1][0], b * m[1][1]]]
}

/// Row-major `[re, im]` pairs, the JSON export layout.
pub fn matrix_to_json(u: &DMatrix<Complex64>) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..u.nrows())
        .map(|r| (0..u.ncols()).map(|c| [u[(r, c)].re, u[(r, c)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

/// Largest entry of `|U†U - I|`.
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for r in 0..p.nrows() {
        for c in 0..p.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((p[(r, c)] - target).norm());
        }
    }
    worst
}
