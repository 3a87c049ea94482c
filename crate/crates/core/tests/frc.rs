mod common;

use common::{chain_branch, chain_reduction};
use ssm_core::continuation::polish_equilibrium;
use ssm_core::continuation::NewtonOptions;
use ssm_core::frc::{
    amplitude_inf, frc_csv, dof_labels, nonauto_for, orbit_residual, reconstruct_orbit, resample_branch,
    response_period, sweep_frc, SweepOptions,
};
use ssm_core::reduced::Representation;

#[test]
fn reconstructed_orbit_is_real() {
    let red = chain_reduction(3);
    let (rvf, branch) = chain_branch(&red, (0.98, 1.001));
    let eq = branch.points.last().unwrap();
    let field = rvf.with_omega(eq.omega);
    let na = nonauto_for(&red, &field, false).unwrap();
    let orbit = reconstruct_orbit(&red.ssm, &na, &field, &eq.state, 2.0 * std::f64::consts::PI / eq.omega, 128);
    assert!(orbit.imaginary_ratio <= 1e-12, "{:e}", orbit.imaginary_ratio);
}

#[test]
fn autonomous_residual_decreases_with_order() {
    let base = chain_reduction(3);
    let (rvf, branch) = chain_branch(&base, (0.98, 1.001));
    let seed = &branch.points.last().unwrap().state;
    let mut last = f64::INFINITY;
    for order in [3, 5, 7] {
        let red = base.at_order(order).unwrap();
        let field = red.field(1.001, rvf.epsilon).unwrap();
        let eq = polish_equilibrium(&field, Representation::Cartesian, seed, &NewtonOptions::default()).unwrap();
        let na = nonauto_for(&red, &field, false).unwrap();
        let res = orbit_residual(&red, &na, &field, &eq.state, 64);
        assert!(res.autonomous < 1.1 * last, "order {order}: {:e} after {last:e}", res.autonomous);
        last = res.autonomous;
    }
}

#[test]
fn skipping_x0_shifts_amplitudes_by_order_epsilon() {
    let red = chain_reduction(3);
    let (rvf, branch) = chain_branch(&red, (0.98, 0.99));
    let eq = branch.points.last().unwrap();
    let field = rvf.with_omega(eq.omega);
    let period = response_period(red.master.period_divisor().unwrap(), eq.omega);
    let full = reconstruct_orbit(&red.ssm, &nonauto_for(&red, &field, false).unwrap(), &field, &eq.state, period, 128);
    let bare = reconstruct_orbit(&red.ssm, &nonauto_for(&red, &field, true).unwrap(), &field, &eq.state, period, 128);
    let diff = (0..3).map(|d| (amplitude_inf(&full.states, d) - amplitude_inf(&bare.states, d)).abs()).fold(0.0, f64::max);
    assert!(diff > 0.0 && diff <= 10.0 * field.epsilon, "{diff:e}");
}

#[test]
fn sweep_rows_follow_the_branch() {
    let red = chain_reduction(3);
    let (rvf, branch) = chain_branch(&red, (0.98, 0.99));
    let points = sweep_frc(&red, &rvf, &branch, &SweepOptions::new(&[0, 1, 2]));
    assert_eq!(points.len(), branch.points.len());
    assert!(points.iter().all(|p| p.error.is_none() && p.amplitudes.len() == 3));
    let csv = frc_csv(&points, 3, &dof_labels(&[0, 1, 2]), &[]);
    assert_eq!(csv.lines().count(), points.len() + 1);
}

#[test]
fn resampled_points_sit_on_requested_frequencies() {
    let red = chain_reduction(3);
    let (rvf, branch) = chain_branch(&red, (0.98, 1.02));
    let omegas = [0.985, 0.995, 1.01];
    let pts = resample_branch(&rvf, &branch, &omegas);
    for w in omegas {
        assert!(pts.iter().any(|p| p.omega == w), "no point at {w}");
    }
    assert!(pts.iter().all(|p| p.residual_norm <= 1e-9));
}
