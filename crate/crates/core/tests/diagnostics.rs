mod common;

use buffered_flow::diagnostics::{
    check_csv, detect_period, distance_to_equilibrium, fit_decay_rate, operator_norm_probe, PERIOD_TOL,
};
use buffered_flow::spectral::FIXED_TOL;
use buffered_flow::{
    equilibrium_state, generate_family, perron_fixed_vector, simulate, Family, FlowModel, Observers, StepPolicy,
};

fn two_cycle(n: usize) -> FlowModel {
    FlowModel::new(generate_family(Family::Cycle(2)).unwrap(), n).unwrap()
}

#[test]
fn two_cycle_decays_exponentially() {
    let model = two_cycle(64);
    let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
    let eq = equilibrium_state(&model, &w, 1.0).unwrap();
    let mut init = model.zero_state();
    init.buffers[0] = 1.0;
    let observers = Observers {
        cadence: 8,
        equilibrium: Some(&eq),
        edge_masses: false,
    };
    let run = simulate(&model, &init, 40.0, &StepPolicy::default(), observers).unwrap();
    let traj = &run.trajectory;
    let d0 = traj.rows[0].distance.unwrap();
    let mid = traj.rows[traj.rows.len() / 2].distance.unwrap();
    assert!(mid < d0);
    let fit = fit_decay_rate(traj, (20.0, 40.0)).unwrap();
    assert!(fit.rate < 0.0);
    assert!(fit.r_squared >= 0.9, "{fit:?}");
    assert!(traj.mass_drift() <= 1e-12);

    let csv = traj.to_csv(Some((20.0, 40.0)));
    assert_eq!(check_csv(&csv).unwrap(), traj.rows.len());
    assert!(detect_period(traj, PERIOD_TOL).is_none());
}

#[test]
fn doubled_equilibrium_is_one_mass_away() {
    let model = two_cycle(16);
    let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
    let eq = equilibrium_state(&model, &w, 1.0).unwrap();
    let d = distance_to_equilibrium(&eq.state.scaled(2.0), &eq).unwrap();
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn single_probe_matches_single_run() {
    let model = two_cycle(32);
    let policy = StepPolicy::default();
    let report = operator_norm_probe(&model, 1, 10.0, &policy).unwrap();
    assert_eq!(report.distances.len(), 1);

    let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
    let eq = equilibrium_state(&model, &w, 1.0).unwrap();
    let mut init = model.zero_state();
    let total = model.num_edges() * model.cells();
    init.cells[total / 2] = model.cells() as f64;
    let run = simulate(&model, &init, 10.0, &policy, Observers::default()).unwrap();
    let d = distance_to_equilibrium(&run.final_state, &eq).unwrap();
    assert!((report.sup_distance - d).abs() < 1e-14, "{} vs {d}", report.sup_distance);
}

#[test]
fn probe_on_two_cycle_settles() {
    let model = two_cycle(32);
    let report = operator_norm_probe(&model, 16, 50.0, &StepPolicy::default()).unwrap();
    assert_eq!(report.distances.len(), 16);
    assert!(report.labels.iter().any(|l| l.starts_with("buffer")));
    assert!(report.sup_distance <= 0.02, "{}", report.sup_distance);
}

#[test]
fn unbuffered_cycle_is_periodic() {
    // c ≡ 1 with θ = 1 shifts exactly one cell per step, so the pattern recurs
    let model = FlowModel::new(generate_family(Family::Cycle(3)).unwrap().without_buffers(), 16).unwrap();
    let w = perron_fixed_vector(&model.bundle, FIXED_TOL).unwrap();
    let eq = equilibrium_state(&model, &w, 1.0).unwrap();
    let init = common::random_state(&model, 5, 1.0);
    let observers = Observers {
        cadence: 4,
        equilibrium: Some(&eq),
        edge_masses: true,
    };
    let run = simulate(&model, &init, 30.0, &StepPolicy::with_theta(1.0), observers).unwrap();
    let period = detect_period(&run.trajectory, PERIOD_TOL).unwrap();
    assert!((period - 3.0).abs() < 1e-9, "{period}");
}
