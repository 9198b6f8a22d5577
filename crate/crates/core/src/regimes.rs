//! Motion-regime classification from integrated trajectories.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Result, SimError};

/// Default absolute λ cutoff between regular and chaotic motion.
pub const DEFAULT_LAMBDA_THRESHOLD: f64 = 5e-3;
/// Default momentum band inside which sign changes of p are ignored.
pub const DEFAULT_P_HYSTERESIS: f64 = 0.5;
/// Cells per axis of the portrait coverage grid.
pub const PORTRAIT_GRID: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lambda: f64,
    pub p_hysteresis: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA_THRESHOLD,
            p_hysteresis: DEFAULT_P_HYSTERESIS,
        }
    }
}

impl Thresholds {
    /// Cutoff relative to the largest exponent of a chaos map.
    pub fn relative_to_map_max(max_lambda: f64) -> Self {
        Self {
            lambda: 1e-2 * max_lambda,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFeatures {
    pub node_crossings: u64,
    pub direction_reversals: u64,
    /// Largest `|x - x0|` over the run.
    pub max_excursion: f64,
    /// `|x| < π/2` at every sample.
    pub confined_to_first_well: bool,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Regular flight.
    RF,
    /// Chaotic flight.
    CF,
    /// Chaotic walking.
    CW,
    /// Trapped in a well, regular.
    T,
    /// Trapped in a well, chaotic oscillation.
    CT,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::RF => "RF",
            Regime::CF => "CF",
            Regime::CW => "CW",
            Regime::T => "T",
            Regime::CT => "CT",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Index of the inter-node cell containing `x`; nodes sit at π/2 + πn.
fn cell_index(x: f64) -> i64 {
    ((x - FRAC_PI_2) / PI).floor() as i64
}

/// Node crossings, momentum reversals and excursion of a sampled path.
pub fn extract_features(traj: &Trajectory, lambda: f64, p_hysteresis: f64) -> Result<TrajectoryFeatures> {
    features_from_path(
        traj.samples.iter().map(|s| (s.tau, s.state.x, s.state.p)),
        lambda,
        p_hysteresis,
    )
}

/// Same as [`extract_features`] over raw `(tau, x, p)` points.
pub fn features_from_path(
    path: impl IntoIterator<Item = (f64, f64, f64)>,
    lambda: f64,
    p_hysteresis: f64,
) -> Result<TrajectoryFeatures> {
    if !(p_hysteresis >= 0.0) {
        return Err(SimError::invalid("p_hysteresis", "must be nonnegative"));
    }
    let mut iter = path.into_iter();
    let (_, x0, p0) = iter.next().ok_or(SimError::EmptyInput("trajectory"))?;
    let mut prev_x = x0;
    let mut crossings = 0u64;
    let mut reversals = 0u64;
    let mut max_excursion = 0.0f64;
    let mut confined = x0.abs() < FRAC_PI_2;
    let mut sign = if p0.abs() > p_hysteresis { p0.signum() } else { 0.0 };
    for (tau, x, p) in iter {
        if !x.is_finite() || !p.is_finite() {
            return Err(SimError::NonFinite("trajectory sample"));
        }
        let dx = x - prev_x;
        if dx.abs() >= PI {
            return Err(SimError::UnderSampled { t: tau, dx });
        }
        crossings += cell_index(x).abs_diff(cell_index(prev_x));
        confined &= x.abs() < FRAC_PI_2;
        max_excursion = max_excursion.max((x - x0).abs());
        if p.abs() > p_hysteresis {
            let s = p.signum();
            if sign != 0.0 && s != sign {
                reversals += 1;
            }
            sign = s;
        }
        prev_x = x;
    }
    Ok(TrajectoryFeatures {
        node_crossings: crossings,
        direction_reversals: reversals,
        max_excursion,
        confined_to_first_well: confined,
        lambda,
    })
}

/// Assign a regime label from trajectory features.
pub fn classify(features: &TrajectoryFeatures, lambda_threshold: f64) -> Regime {
    let chaotic = features.lambda > lambda_threshold;
    let in_one_well = features.confined_to_first_well || features.node_crossings == 0;
    match (in_one_well, chaotic) {
        (true, false) => Regime::T,
        (true, true) => Regime::CT,
        (false, true) if features.direction_reversals > 0 => Regime::CW,
        (false, true) => Regime::CF,
        (false, false) => Regime::RF,
    }
}

/// Points on the (g₁, g₂) plane up to one time mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitSet {
    pub tau_mark: f64,
    /// `(tau, g1, g2)` triples in time order.
    pub points: Vec<[f64; 3]>,
    /// Occupied fraction of the grid cells that meet the unit disk.
    pub coverage: f64,
}

/// Coverage of the unit disk by a point cloud on a `PORTRAIT_GRID²` grid.
pub struct CoverageGrid {
    occupied: Vec<bool>,
    count: usize,
    disk_cells: usize,
}

impl Default for CoverageGrid {
    fn default() -> Self {
        Self::new()
    }
}

impl CoverageGrid {
    pub fn new() -> Self {
        let n = PORTRAIT_GRID;
        let w = 2.0 / n as f64;
        let mut disk_cells = 0;
        for i in 0..n {
            for j in 0..n {
                // Distance from the origin to the nearest point of the cell.
                let near = |k: usize| {
                    let lo = -1.0 + k as f64 * w;
                    let hi = lo + w;
                    if lo > 0.0 {
                        lo
                    } else if hi < 0.0 {
                        -hi
                    } else {
                        0.0
                    }
                };
                if near(i).hypot(near(j)) < 1.0 {
                    disk_cells += 1;
                }
            }
        }
        Self {
            occupied: vec![false; n * n],
            count: 0,
            disk_cells,
        }
    }

    pub fn insert(&mut self, a: f64, b: f64) {
        let n = PORTRAIT_GRID;
        let idx = |v: f64| (((v + 1.0) * 0.5 * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize;
        let k = idx(a) * n + idx(b);
        if !self.occupied[k] {
            self.occupied[k] = true;
            self.count += 1;
        }
    }

    pub fn fraction(&self) -> f64 {
        self.count as f64 / self.disk_cells as f64
    }
}

/// Cell coverage of the unit disk by the `(g1, g2)` points of a trajectory
/// up to `tau_max`.
pub fn portrait_coverage(traj: &Trajectory, tau_max: f64) -> f64 {
    let mut grid = CoverageGrid::new();
    for s in traj.samples.iter().take_while(|s| s.tau <= tau_max) {
        grid.insert(s.state.g.re, s.state.g.im);
    }
    grid.fraction()
}

/// Truncate the `(g1, g2)` projection of a trajectory at each mark.
pub fn group_parameter_portrait(traj: &Trajectory, tau_marks: &[f64]) -> Result<Vec<PortraitSet>> {
    let end = traj.samples.last().ok_or(SimError::EmptyInput("trajectory"))?.tau;
    let mut marks = tau_marks.to_vec();
    if marks.iter().any(|m| !m.is_finite()) {
        return Err(SimError::NonFinite("tau mark"));
    }
    marks.sort_by(f64::total_cmp);
    if let Some(&last) = marks.last() {
        if last > end {
            return Err(SimError::invalid(
                "tau_marks",
                format!("mark {last} exceeds trajectory end {end}"),
            ));
        }
    }
    let mut grid = CoverageGrid::new();
    let mut samples = traj.samples.iter().peekable();
    let mut points = Vec::new();
    let mut out = Vec::with_capacity(marks.len());
    for mark in marks {
        while let Some(s) = samples.next_if(|s| s.tau <= mark) {
            let (g1, g2) = (s.state.g.re, s.state.g.im);
            grid.insert(g1, g2);
            points.push([s.tau, g1, g2]);
        }
        out.push(PortraitSet {
            tau_mark: mark,
            points: points.clone(),
            coverage: grid.fraction(),
        });
    }
    Ok(out)
}

/// Distance from `x` to the nearest node.
pub fn node_distance(x: f64) -> f64 {
    let r = (x - FRAC_PI_2).rem_euclid(PI);
    r.min(PI - r)
}

/// Ratio of the largest sample-to-sample change of `u` on intervals with an
/// end within `node_halfwidth` of a node to the largest change on the
/// remaining intervals. `None` when either set is empty or flat.
pub fn node_jump_ratio(traj: &Trajectory, node_halfwidth: f64) -> Option<f64> {
    let (mut on, mut off) = (None::<f64>, None::<f64>);
    for w in traj.samples.windows(2) {
        let du = (w[1].u - w[0].u).abs();
        let near = node_distance(w[0].state.x) < node_halfwidth
            || node_distance(w[1].state.x) < node_halfwidth;
        let slot = if near { &mut on } else { &mut off };
        *slot = Some(slot.map_or(du, |m| m.max(du)));
    }
    match (on, off) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// Modulation period of a fast-oscillating signal, from the mean spacing
/// of the peaks of its envelope. The envelope at each sample is the largest
/// `|v|` within `envelope_window` around it; a peak must dominate the
/// envelope within `min_separation` on both sides. Returns `None` with
/// fewer than two peaks.
pub fn modulation_period(series: &[(f64, f64)], envelope_window: f64, min_separation: f64) -> Option<f64> {
    let n = series.len();
    if n < 3 {
        return None;
    }
    let half = 0.5 * envelope_window;
    let mut env = vec![0.0f64; n];
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        let t = series[i].0;
        while series[lo].0 < t - half {
            lo += 1;
        }
        while hi + 1 < n && series[hi + 1].0 <= t + half {
            hi += 1;
        }
        env[i] = series[lo..=hi].iter().fold(0.0, |m, &(_, v)| m.max(v.abs()));
    }
    let mut peaks: Vec<f64> = Vec::new();
    let (mut a, mut b) = (0usize, 0usize);
    for i in 0..n {
        let t = series[i].0;
        if t - series[0].0 < min_separation || series[n - 1].0 - t < min_separation {
            continue;
        }
        while series[a].0 < t - min_separation {
            a += 1;
        }
        while b + 1 < n && series[b + 1].0 <= t + min_separation {
            b += 1;
        }
        let dominant = env[a..=b].iter().all(|&e| e <= env[i]);
        // First sample of a plateau only.
        let rising = i == 0 || env[i - 1] < env[i];
        if dominant && rising && peaks.last().map_or(true, |&p| t - p >= min_separation) {
            peaks.push(t);
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: f64, tau_end: f64, dt: f64) -> Vec<(f64, f64, f64)> {
        let n = (tau_end / dt) as usize;
        (0..=n).map(|i| {
            let t = i as f64 * dt;
            (t, v * t, v)
        }).collect()
    }

    #[test]
    fn straight_line_crossings_match_count() {
        for x_end in [1.0, 1.6, 4.0, 4.8, 20.0, 100.3] {
            let f = features_from_path(line(x_end / 100.0, 100.0, 0.5), 0.0, 0.5).unwrap();
            let expected = ((x_end - FRAC_PI_2) / PI).floor() as i64 + 1;
            assert_eq!(f.node_crossings as i64, expected, "x_end={x_end}");
            assert_eq!(f.direction_reversals, 0);
            assert_eq!(f.confined_to_first_well, x_end < FRAC_PI_2);
        }
    }

    #[test]
    fn hysteresis_ignores_chatter() {
        let ps = [2.0, 0.3, -0.2, 0.4, -0.1, 1.0, -3.0, -0.4, 0.2, -2.0];
        let path = ps.iter().enumerate().map(|(i, &p)| (i as f64, 0.0, p));
        let f = features_from_path(path, 0.0, 0.5).unwrap();
        assert_eq!(f.direction_reversals, 1);
    }

    #[test]
    fn under_sampled_path_rejected() {
        let path = [(0.0, 0.0, 1.0), (1.0, 3.5, 1.0)];
        assert!(matches!(
            features_from_path(path, 0.0, 0.5),
            Err(SimError::UnderSampled { .. })
        ));
        assert!(features_from_path(std::iter::empty(), 0.0, 0.5).is_err());
    }

    #[test]
    fn classify_rules() {
        let base = TrajectoryFeatures {
            node_crossings: 3,
            direction_reversals: 0,
            max_excursion: 10.0,
            confined_to_first_well: false,
            lambda: 0.0,
        };
        let t = DEFAULT_LAMBDA_THRESHOLD;
        assert_eq!(classify(&base, t), Regime::RF);
        assert_eq!(classify(&TrajectoryFeatures { lambda: 0.03, ..base }, t), Regime::CF);
        assert_eq!(
            classify(&TrajectoryFeatures { lambda: 0.03, direction_reversals: 4, ..base }, t),
            Regime::CW
        );
        let trapped = TrajectoryFeatures {
            node_crossings: 0,
            confined_to_first_well: true,
            ..base
        };
        assert_eq!(classify(&trapped, t), Regime::T);
        assert_eq!(classify(&TrajectoryFeatures { lambda: 0.03, ..trapped }, t), Regime::CT);
    }

    #[test]
    fn coverage_grid_bounds() {
        let mut g = CoverageGrid::new();
        assert_eq!(g.fraction(), 0.0);
        let mut k = 0;
        for i in 0..400 {
            for j in 0..400 {
                let (a, b) = (-1.0 + i as f64 / 199.5, -1.0 + j as f64 / 199.5);
                if a.hypot(b) <= 1.0 {
                    g.insert(a, b);
                    k += 1;
                }
            }
        }
        assert!(k > 0);
        assert!((g.fraction() - 1.0).abs() < 0.02, "{}", g.fraction());
        assert!(g.fraction() <= 1.0);
    }

    #[test]
    fn modulation_period_of_synthetic_beat() {
        let series: Vec<(f64, f64)> = (0..20000)
            .map(|i| {
                let t = i as f64 * 0.1;
                let env = 0.6 + 0.4 * (2.0 * PI * t / 70.0).cos();
                (t, env * (2.1 * t).sin())
            })
            .collect();
        let period = modulation_period(&series, 6.0, 20.0).unwrap();
        assert!((period - 70.0).abs() < 1.0, "{period}");
        assert!(modulation_period(&series[..3], 6.0, 20.0).is_none());
    }
}
