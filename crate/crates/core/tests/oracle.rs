mod common;

use common::{chain, chain_branch, chain_reduction};
use ssm_core::continuation::Stability;
use ssm_core::frc::{sweep_frc, SweepOptions};
use ssm_core::oracle::{
    collocate_orbit, forward_steady_state, shoot_orbit, OrbitGuess, OrbitRequest,
};

fn chain_points(range: (f64, f64)) -> Vec<ssm_core::frc::FrcPoint> {
    let red = chain_reduction(3);
    let (rvf, branch) = chain_branch(&red, range);
    let mut opts = SweepOptions::new(&[0, 1, 2]);
    opts.keep_orbits = true;
    sweep_frc(&red, &rvf, &branch, &opts)
}

#[test]
fn collocation_matches_shooting() {
    let model = chain();
    let points = chain_points((0.98, 1.002));
    let step = points.len() / 5;
    for p in points.iter().step_by(step).take(5) {
        let orbit = p.orbit.as_ref().unwrap();
        let req = OrbitRequest { intervals: 40, ..OrbitRequest::new(p.omega, p.epsilon).with_period(orbit.period) };
        let shot = shoot_orbit(&model, &req, &orbit.states[0]).unwrap();
        let coll = collocate_orbit(&model, &req, &OrbitGuess { states: orbit.states.clone() }).unwrap();
        let gap = (&shot.samples[0] - &coll.samples[0]).norm() / shot.samples[0].norm();
        assert!(gap <= 1e-6, "omega {}: {gap:e}", p.omega);
    }
}

#[test]
fn floquet_stability_matches_slow_dynamics() {
    let model = chain();
    let points = chain_points((0.98, 1.02));
    let mut kinds = [false; 2];
    for p in points.iter().filter(|p| p.hyperbolicity > 0.1).step_by(10) {
        let orbit = p.orbit.as_ref().unwrap();
        let req = OrbitRequest::new(p.omega, p.epsilon).with_period(orbit.period);
        let Ok(shot) = shoot_orbit(&model, &req, &orbit.states[0]) else { continue };
        let stable = p.stability == Stability::Stable;
        assert_eq!(shot.stable(), Some(stable), "omega {}", p.omega);
        kinds[stable as usize] = true;
    }
    assert!(kinds[0] && kinds[1], "both stable and unstable samples expected");
}

#[test]
fn forward_integration_reaches_a_stable_point() {
    let model = chain();
    let points = chain_points((0.98, 1.002));
    let p = points.iter().find(|p| p.stability == Stability::Stable && p.omega > 0.99).unwrap();
    let orbit = p.orbit.as_ref().unwrap();
    let req = OrbitRequest::new(p.omega, p.epsilon).with_period(orbit.period);
    let fwd = forward_steady_state(&model, &req, &orbit.states[0]).unwrap();
    for d in 0..3 {
        let rel = (fwd.amplitude(d) - p.amplitudes[d]).abs() / fwd.amplitude(d);
        assert!(rel <= 0.02, "dof {d}: {rel:e}");
    }
}
