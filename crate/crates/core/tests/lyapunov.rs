use atomsim::dynamics::{AtomState, SimParams};
use atomsim::lyapunov::{
    lyapunov_map, max_lyapunov, predictability_time, AxisRange, LyapunovMethod, LyapunovOptions, Schedule,
};
use atomsim::ode::StepControl;
use atomsim::SimError;
use proptest::prelude::*;

const OMEGA_R: f64 = 1e-3;

fn ground(p0: f64) -> AtomState {
    AtomState::ground(0.0, p0)
}

fn lambda(delta: f64, p0: f64, tau: f64, opts: &LyapunovOptions) -> f64 {
    max_lyapunov(&ground(p0), &SimParams::constant(OMEGA_R, delta), tau, opts).unwrap().lambda
}

#[test]
fn chaotic_walking_exponent_regression() {
    // Frozen from a converged variational run at the default options.
    let r = max_lyapunov(&ground(10.0), &SimParams::constant(OMEGA_R, 0.2), 1e5, &LyapunovOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.lambda / 3.253_173_252_360_645e-2 - 1.0).abs() < 1e-6, "{:.17e}", r.lambda);
}

#[test]
fn chaotic_estimates_are_stable_under_renormalization_and_tolerance() {
    let base = LyapunovOptions::default();
    let half = LyapunovOptions { renorm_interval: 0.5, ..base };
    let tight = LyapunovOptions { control: StepControl::with_tol(1e-12), ..base };
    for p0 in [10.0, 45.0] {
        let l0 = lambda(0.2, p0, 1e5, &base);
        for (name, o) in [("half interval", &half), ("tight tolerance", &tight)] {
            let l = lambda(0.2, p0, 1e5, o);
            assert!((l / l0 - 1.0).abs() < 0.1, "p0={p0} {name}: {l} vs {l0}");
        }
    }
}

#[test]
fn chaotic_flight_methods_agree() {
    let v = lambda(0.2, 45.0, 1e5, &LyapunovOptions::default());
    let t = lambda(0.2, 45.0, 1e5, &LyapunovOptions::two_trajectory());
    assert!(((v - t) / v).abs() < 0.2, "{v} vs {t}");
}

#[test]
fn trapped_regular_orbit_has_subexponential_stretch() {
    // A regular orbit separates polynomially, so lambda * tau grows by at
    // most k ln 10 per decade for growth ~ tau^k; allow k up to 2.
    let p = SimParams::constant(OMEGA_R, -0.2);
    let a = max_lyapunov(&ground(5.0), &p, 1e4, &LyapunovOptions::default()).unwrap();
    let b = max_lyapunov(&ground(5.0), &p, 1e5, &LyapunovOptions::default()).unwrap();
    let growth = b.lambda * 1e5 - a.lambda * 1e4;
    assert!(growth < 2.0 * 10f64.ln(), "log-stretch grew by {growth}");
    assert!(b.lambda < a.lambda / 5.0);
    assert!(b.lambda < 1e-3);
}

#[test]
fn resonance_column_is_regular() {
    let map = lyapunov_map(
        AxisRange::point(0.0),
        AxisRange::new(0.0, 60.0, 5),
        &SimParams::constant(OMEGA_R, 0.0),
        0.0,
        2e4,
        &LyapunovOptions::default(),
        Schedule::Parallel,
    )
    .unwrap();
    for j in 0..5 {
        let l = map.lambda(0, j).unwrap();
        assert!(l < 1e-3, "p0={}: {l}", map.p0_axis[j]);
    }
}

#[test]
fn single_cell_map_equals_direct_call() {
    let opts = LyapunovOptions::default();
    let params = SimParams::constant(OMEGA_R, 0.3);
    let map = lyapunov_map(AxisRange::point(0.2), AxisRange::point(10.0), &params, 0.0, 2000.0, &opts, Schedule::Parallel)
        .unwrap();
    let direct = lambda(0.2, 10.0, 2000.0, &opts);
    assert_eq!(map.lambda(0, 0), Some(direct));
    assert_eq!(map.missing(), 0);
}

#[test]
fn map_is_schedule_independent_and_repeatable() {
    let opts = LyapunovOptions::default();
    let params = SimParams::constant(OMEGA_R, 0.0);
    let run = |s| {
        lyapunov_map(AxisRange::new(-0.4, 0.4, 3), AxisRange::new(5.0, 45.0, 3), &params, 0.0, 1000.0, &opts, s).unwrap()
    };
    let seq = run(Schedule::Sequential);
    assert_eq!(seq, run(Schedule::Sequential));
    assert_eq!(seq, run(Schedule::Parallel));
    assert_eq!(seq.cells.len(), 3);
    assert!(seq.cells.iter().all(|row| row.len() == 3));
    assert_eq!(seq.delta_axis, vec![-0.4, 0.0, 0.4]);
}

#[test]
fn failed_cells_are_missing_not_fatal() {
    // A step budget too small for any cell makes every integration fail.
    let mut opts = LyapunovOptions::default();
    opts.control.max_steps = 5;
    let map = lyapunov_map(
        AxisRange::new(0.0, 0.2, 2),
        AxisRange::point(10.0),
        &SimParams::constant(OMEGA_R, 0.0),
        0.0,
        100.0,
        &opts,
        Schedule::Sequential,
    )
    .unwrap();
    assert_eq!(map.missing(), 2);
    assert_eq!(map.max_lambda(), None);
}

#[test]
fn convergence_series_ends_at_reported_value() {
    let r = max_lyapunov(&ground(10.0), &SimParams::constant(OMEGA_R, 0.2), 3000.0, &LyapunovOptions::two_trajectory())
        .unwrap();
    assert_eq!(r.method, LyapunovMethod::TwoTrajectory);
    let last = r.convergence_series.last().unwrap();
    assert_eq!(last.lambda, r.lambda);
    assert_eq!(last.tau, 3000.0);
    assert!(r.convergence_series.windows(2).all(|w| w[1].tau > w[0].tau));
}

#[test]
fn predictability_time_examples() {
    assert!((predictability_time(0.01, std::f64::consts::E, 1.0).unwrap() - 100.0).abs() < 1e-12);
    assert_eq!(predictability_time(0.3, 2.0, 2.0).unwrap(), 0.0);
    assert!((predictability_time(0.05, 1e6, 1.0).unwrap() - 1e6f64.ln() / 0.05).abs() < 1e-10);
    assert!(matches!(predictability_time(0.0, 2.0, 1.0), Err(SimError::NonPositiveLyapunov(_))));
    assert!(predictability_time(0.1, 0.5, 1.0).is_err());
    assert!(predictability_time(0.1, 1.0, 0.0).is_err());
}

proptest! {
    #[test]
    fn predictability_inverts_exponential_growth(lambda in 1e-4..1.0f64, dx0 in 1e-9..1e-2f64, factor in 1.0..1e8f64) {
        let t = predictability_time(lambda, dx0 * factor, dx0).unwrap();
        prop_assert!(t >= 0.0);
        prop_assert!(((dx0 * (lambda * t).exp()) / (dx0 * factor) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn axis_values_are_evenly_spaced_with_exact_ends(start in -5.0..5.0f64, width in 0.1..10.0f64, count in 2usize..300) {
        let axis = AxisRange::new(start, start + width, count);
        let v = axis.values();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], start);
        prop_assert_eq!(*v.last().unwrap(), start + width);
        let step = width / (count - 1) as f64;
        for w in v.windows(2) {
            prop_assert!((w[1] - w[0] - step).abs() < 1e-12 * (1.0 + width));
        }
    }
}
