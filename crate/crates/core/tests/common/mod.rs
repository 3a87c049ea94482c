#![allow(dead_code)]

use ssm_core::continuation::{continue_branch, find_initial_equilibrium, Branch, ContinuationOptions};
use ssm_core::model::MechanicalModel;
use ssm_core::models::chain_model;
use ssm_core::pipeline::{Reduction, ReductionConfig};
use ssm_core::reduced::{ReducedVectorField, Representation};

pub fn chain() -> MechanicalModel {
    chain_model(5e-4, 1e-3, 1.5e-3, 1e-3, 1.0).unwrap()
}

pub fn chain_reduction(order: u32) -> Reduction {
    Reduction::build(&chain(), &ReductionConfig::new(&[0, 1, 2], order, 1.0)).unwrap()
}

/// Cartesian chain branch at `eps = 0.005` over `range`.
pub fn chain_branch(red: &Reduction, range: (f64, f64)) -> (ReducedVectorField, Branch) {
    let rvf = red.field(range.0, 0.005).unwrap();
    let seed = find_initial_equilibrium(&rvf, Representation::Cartesian, "root-find", None).unwrap();
    let branch =
        continue_branch(&rvf, Representation::Cartesian, range, &seed, &ContinuationOptions::default()).unwrap();
    (rvf, branch)
}
