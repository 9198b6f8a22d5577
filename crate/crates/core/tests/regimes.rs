use std::f64::consts::{FRAC_PI_2, PI};

use atomsim::dynamics::{integrate, node_flight_time, AtomState, IntegratorOptions, SimParams, Trajectory};
use atomsim::lyapunov::{max_lyapunov, LyapunovOptions};
use atomsim::ode::StepControl;
use atomsim::regimes::{
    classify, extract_features, features_from_path, group_parameter_portrait, modulation_period, portrait_coverage,
    Regime, Thresholds, TrajectoryFeatures, DEFAULT_LAMBDA_THRESHOLD, DEFAULT_P_HYSTERESIS,
};
use atomsim::SimError;
use proptest::prelude::*;

const OMEGA_R: f64 = 1e-3;
const TAU_CLASSIFY: f64 = 1e4;

fn run(delta: f64, p0: f64, tau: f64, tol: f64) -> Trajectory {
    integrate(&AtomState::ground(0.0, p0), &SimParams::constant(OMEGA_R, delta), tau, &IntegratorOptions::with_tol(tol))
        .unwrap()
}

fn label(delta: f64, p0: f64, tol: f64) -> (Regime, TrajectoryFeatures) {
    let traj = run(delta, p0, TAU_CLASSIFY, tol);
    let opts = LyapunovOptions {
        control: StepControl::with_tol(tol),
        ..LyapunovOptions::default()
    };
    let l = max_lyapunov(&AtomState::ground(0.0, p0), &traj.params, TAU_CLASSIFY, &opts).unwrap();
    let f = extract_features(&traj, l.lambda, DEFAULT_P_HYSTERESIS).unwrap();
    (classify(&f, DEFAULT_LAMBDA_THRESHOLD), f)
}

#[test]
fn regime_examples_get_their_labels_at_two_tolerances() {
    let expected = [
        (0.8, 45.0, Regime::RF),
        (0.2, 45.0, Regime::CF),
        (0.2, 10.0, Regime::CW),
        (-0.2, 5.0, Regime::T),
    ];
    for tol in [1e-10, 1e-12] {
        for (delta, p0, want) in expected {
            let (got, f) = label(delta, p0, tol);
            assert_eq!(got, want, "delta={delta} p0={p0} tol={tol}: {f:?}");
        }
    }
}

#[test]
fn trapped_and_flying_features() {
    let (_, t) = label(-0.2, 5.0, 1e-10);
    assert_eq!(t.node_crossings, 0);
    assert!(t.confined_to_first_well);
    assert!(t.max_excursion < FRAC_PI_2);
    let (_, rf) = label(0.8, 45.0, 1e-10);
    assert_eq!(rf.direction_reversals, 0);
    assert!(rf.node_crossings > 0);
    assert!(!rf.confined_to_first_well);
}

#[test]
fn constant_velocity_crossings_follow_floor_formula() {
    for (v, tau_end) in [(0.01, 1000.0), (0.037, 800.0), (0.2, 333.0)] {
        let dt = 0.1;
        let n = (tau_end / dt) as usize;
        let path = (0..=n).map(|i| {
            let t = i as f64 * dt;
            (t, v * t, v)
        });
        let f = features_from_path(path, 0.0, 0.5).unwrap();
        let x_end = v * n as f64 * dt;
        let expected = ((x_end - FRAC_PI_2) / PI).floor() as u64 + 1;
        assert_eq!(f.node_crossings, expected, "v={v}");
        assert_eq!(f.direction_reversals, 0);
    }
}

#[test]
fn skipped_node_is_rejected() {
    let path = vec![(0.0, 0.0, 1.0), (1.0, 3.5, 1.0)];
    assert!(matches!(
        features_from_path(path, 0.0, 0.5),
        Err(SimError::UnderSampled { .. })
    ));
    assert!(matches!(
        features_from_path(Vec::new(), 0.0, 0.5),
        Err(SimError::EmptyInput(_))
    ));
}

#[test]
fn trapped_chaos_gets_its_own_label() {
    let f = TrajectoryFeatures {
        node_crossings: 0,
        direction_reversals: 40,
        max_excursion: 1.2,
        confined_to_first_well: true,
        lambda: 0.05,
    };
    assert_eq!(classify(&f, DEFAULT_LAMBDA_THRESHOLD), Regime::CT);
    assert_eq!(classify(&f, 0.1), Regime::T);
}

#[test]
fn relative_threshold_scales_with_map_maximum() {
    let t = Thresholds::relative_to_map_max(0.04);
    assert!((t.lambda - 4e-4).abs() < 1e-18);
    assert_eq!(t.p_hysteresis, DEFAULT_P_HYSTERESIS);
    assert_eq!(Thresholds::default().lambda, 5e-3);
}

#[test]
fn portraits_are_nested_inside_the_disk_and_coverage_grows() {
    let traj = run(0.2, 10.0, 1000.0, 1e-10);
    let sets = group_parameter_portrait(&traj, &[1000.0, 100.0, 500.0]).unwrap();
    assert_eq!(sets.iter().map(|s| s.tau_mark).collect::<Vec<_>>(), vec![100.0, 500.0, 1000.0]);
    for w in sets.windows(2) {
        assert_eq!(&w[1].points[..w[0].points.len()], &w[0].points[..]);
        assert!(w[1].coverage >= w[0].coverage);
    }
    for s in &sets {
        assert!(s.points.iter().all(|p| p[0] <= s.tau_mark && p[1].hypot(p[2]) <= 1.0 + 1e-9));
    }
    assert_eq!(sets[2].coverage, portrait_coverage(&traj, 1000.0));
    assert!(group_parameter_portrait(&traj, &[1200.0]).is_err());
}

#[test]
fn regular_flight_modulation_matches_node_flight_time() {
    let traj = run(0.8, 45.0, 1000.0, 1e-10);
    let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.tau, s.u)).collect();
    let period = modulation_period(&series, 6.0, 25.0).unwrap();
    let expected = node_flight_time(OMEGA_R, 45.0);
    assert!((expected - 69.81317007977318).abs() < 1e-12);
    assert!((period / expected - 1.0).abs() < 0.1, "{period} vs {expected}");
}

proptest! {
    #[test]
    fn classification_is_a_pure_function(
        crossings in 0u64..50,
        reversals in 0u64..50,
        excursion in 0.0..100.0f64,
        confined in any::<bool>(),
        lambda in 0.0..0.1f64,
        threshold in 0.0..0.1f64,
    ) {
        let f = TrajectoryFeatures {
            node_crossings: if confined { 0 } else { crossings },
            direction_reversals: reversals,
            max_excursion: excursion,
            confined_to_first_well: confined,
            lambda,
        };
        let a = classify(&f, threshold);
        prop_assert_eq!(a, classify(&f.clone(), threshold));
        if confined {
            prop_assert!(matches!(a, Regime::T | Regime::CT));
        }
        if lambda <= threshold && !confined && f.node_crossings > 0 {
            prop_assert_eq!(a, Regime::RF);
        }
    }
}
