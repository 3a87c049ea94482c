//! End-to-end reduction: model to spectrum, master subspace, SSM and
//! reduced vector field.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{build_first_order, FirstOrderSystem, MechanicalModel};
use crate::reduced::ReducedVectorField;
use crate::spectral::{detect_inner_resonances, select_master, solve_spectrum, MasterSubspace, Spectrum};
use crate::ssm::auto::{compute_autonomous_ssm, AutonomousSsm};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Pair ordinals of the master modes.
    pub master: Vec<usize>,
    pub order: u32,
    /// Highest degree searched for inner resonances; defaults to `order`.
    pub max_res_order: Option<u32>,
    /// Resonance tolerance; defaults to `0.05 min |Im lambda|` over the master set.
    pub res_tol: Option<f64>,
    /// Excitation frequency fixing the external resonance vector.
    pub omega_ref: f64,
    pub max_denominator: i64,
}

impl ReductionConfig {
    pub fn new(master: &[usize], order: u32, omega_ref: f64) -> Self {
        ReductionConfig {
            master: master.to_vec(),
            order,
            max_res_order: None,
            res_tol: None,
            omega_ref,
            max_denominator: 12,
        }
    }

    pub fn with_res_tol(mut self, tol: f64) -> Self {
        self.res_tol = Some(tol);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub model: MechanicalModel,
    pub sys: FirstOrderSystem,
    pub spectrum: Spectrum,
    pub master: MasterSubspace,
    pub ssm: AutonomousSsm,
    pub config: ReductionConfig,
}

impl Reduction {
    pub fn build(model: &MechanicalModel, config: &ReductionConfig) -> Result<Self> {
        let sys = build_first_order(model);
        let spectrum = solve_spectrum(&sys, model.n)?;
        let master = prepare_master(&spectrum, config)?;
        let ssm = compute_autonomous_ssm(&sys, &master, config.order)?;
        info!(
            target: "ssm-auto",
            "order {} SSM with {} retained normal-form terms",
            config.order,
            ssm.gamma.iter().map(Vec::len).sum::<usize>()
        );
        Ok(Reduction { model: model.clone(), sys, spectrum, master, ssm, config: config.clone() })
    }

    /// Same model and master set at another truncation order.
    pub fn at_order(&self, order: u32) -> Result<Self> {
        let mut config = self.config.clone();
        config.order = order;
        if self.config.max_res_order.is_none() {
            let master = prepare_master(&self.spectrum, &config)?;
            let ssm = compute_autonomous_ssm(&self.sys, &master, order)?;
            return Ok(Reduction { master, ssm, config, ..self.clone() });
        }
        let ssm = compute_autonomous_ssm(&self.sys, &self.master, order)?;
        Ok(Reduction { ssm, config, ..self.clone() })
    }

    pub fn field(&self, omega: f64, epsilon: f64) -> Result<ReducedVectorField> {
        ReducedVectorField::new(&self.ssm, &self.master, &self.sys, omega, epsilon)
    }

    pub fn resonance_tolerance(&self) -> f64 {
        self.master.tolerance
    }
}

/// Selects the master set, detects inner resonances and fixes `r`.
pub fn prepare_master(spectrum: &Spectrum, config: &ReductionConfig) -> Result<MasterSubspace> {
    let mut master = select_master(spectrum, &config.master)?;
    let tol = config.res_tol.unwrap_or_else(|| master.default_tolerance());
    detect_inner_resonances(&mut master, config.max_res_order.unwrap_or(config.order), tol);
    let r = master.set_external_resonance(config.omega_ref, tol, config.max_denominator)?;
    info!(
        target: "spectral",
        "external resonance r = [{}], {} resonant monomials",
        r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "),
        master.resonant_pair_count()
    );
    Ok(master)
}
