use atomsim::dynamics::{integrate, AtomState, IntegratorOptions, SimParams};
use atomsim::ensemble::{histogram, run_ensemble, EnsembleSpec};
use atomsim::io::{write_ensemble_csv, write_histogram_csv, write_map_csv, write_map_matrix, write_trajectory_csv};
use atomsim::lyapunov::{lyapunov_map, AxisRange, LyapunovOptions, Schedule};

fn text(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn trajectory_csv_round_trips_every_sample() {
    let traj = integrate(&AtomState::ground(0.0, 10.0), &SimParams::constant(1e-3, 0.2), 5.0, &IntegratorOptions::default())
        .unwrap();
    let csv = text(|w| write_trajectory_csv(w, &traj));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("tau,x,p,g1,g2,G1,G2,H,norm,u"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), traj.samples.len());
    for (row, s) in rows.iter().zip(&traj.samples) {
        assert_eq!(row.len(), 10);
        assert_eq!(row[0], s.tau);
        assert_eq!(row[1], s.state.x);
        assert_eq!(row[6], s.state.big_g.im);
        assert_eq!(row[9], s.u);
    }
}

#[test]
fn map_outputs_share_cells_and_mark_missing_values() {
    let mut opts = LyapunovOptions::default();
    let params = SimParams::constant(1e-3, 0.0);
    let ok = lyapunov_map(AxisRange::new(0.0, 0.2, 2), AxisRange::new(5.0, 10.0, 3), &params, 0.0, 50.0, &opts, Schedule::Sequential)
        .unwrap();
    let csv = text(|w| write_map_csv(w, &ok));
    assert_eq!(csv.lines().next(), Some("delta,p0,lambda,converged"));
    assert_eq!(csv.lines().count(), 1 + 6);
    let second: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(second[1].parse::<f64>().unwrap(), 7.5);
    assert_eq!(second[2].parse::<f64>().unwrap(), ok.lambda(0, 1).unwrap());
    let matrix = text(|w| write_map_matrix(w, &ok));
    let rows: Vec<&str> = matrix.lines().collect();
    assert_eq!(rows.len(), 1 + 3);
    assert!(rows[0].starts_with("2 "));

    opts.control.max_steps = 2;
    let bad = lyapunov_map(AxisRange::point(0.1), AxisRange::point(5.0), &params, 0.0, 50.0, &opts, Schedule::Sequential)
        .unwrap();
    assert!(text(|w| write_map_csv(w, &bad)).lines().nth(1).unwrap().contains(",,false"));
    assert!(text(|w| write_map_matrix(w, &bad)).contains("NaN"));
}

#[test]
fn ensemble_and_histogram_csv_layouts() {
    let spec = EnsembleSpec {
        tau_end: 10.0,
        ..EnsembleSpec::gaussian_beam(0.2, 5, 1)
    };
    let res = run_ensemble(&spec, &IntegratorOptions::default(), Schedule::Sequential).unwrap();
    let csv = text(|w| write_ensemble_csv(w, &res));
    assert_eq!(csv.lines().next(), Some("atom_id,x_final,p_final,g1,g2,G1,G2,norm"));
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 8));
    let h = histogram(&res.final_positions(), 0.5, -2.0, 2.0).unwrap();
    let hist = text(|w| write_histogram_csv(w, &h));
    assert_eq!(hist.lines().next(), Some("bin_left,count,density"));
    assert_eq!(hist.lines().count(), 1 + 8);
}
