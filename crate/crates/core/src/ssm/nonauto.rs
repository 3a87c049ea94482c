//! Leading-order time-periodic correction of the SSM under harmonic forcing.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SsmError};
use crate::linalg::{bordered_solve, to_complex, to_complex_vec, ComplexLu};
use crate::model::FirstOrderSystem;
use crate::poly::C64;
use crate::spectral::MasterSubspace;

#[derive(Clone, Debug)]
pub struct NonAutoCorrection {
    pub omega: f64,
    /// Modal forcing `S_{0,i}`; zero for modes not flagged.
    pub s0: Vec<C64>,
    pub x0: DVector<C64>,
    pub flags: Vec<bool>,
}

impl NonAutoCorrection {
    /// `2 eps Re(x0 e^{i Omega t})`.
    pub fn response(&self, t: f64, epsilon: f64) -> DVector<f64> {
        let e = C64::from_polar(1.0, self.omega * t);
        self.x0.map(|x| 2.0 * epsilon * (x * e).re)
    }
}

/// Flags `|lambda_i - i Omega| <= tol`.
pub fn forcing_flags(master: &MasterSubspace, omega: f64, tol: f64) -> Vec<bool> {
    let io = C64::new(0.0, omega);
    master.modes.iter().map(|p| (p.lambda - io).norm() <= tol).collect()
}

/// Computes `S_0` and `x0` at `omega`, flagging modes within `tol` of `i Omega`.
pub fn compute_nonauto(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    omega: f64,
    tol: f64,
    skip_x0: bool,
) -> Result<NonAutoCorrection> {
    let flags = forcing_flags(master, omega, tol);
    check_non_master(master, omega, tol)?;
    compute_nonauto_flagged(sys, master, omega, &flags, skip_x0)
}

/// Raises an error if a mode outside the master set is within `tol` of `i Omega`.
pub fn check_non_master(master: &MasterSubspace, omega: f64, tol: f64) -> Result<()> {
    let io = C64::new(0.0, omega);
    for (k, lam) in master.others.iter().enumerate() {
        if (lam - io).norm() <= tol {
            return Err(SsmError::NonMasterForcingResonance(k));
        }
    }
    Ok(())
}

/// Same as [`compute_nonauto`] with an explicit resonant set.
pub fn compute_nonauto_flagged(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    omega: f64,
    flags: &[bool],
    skip_x0: bool,
) -> Result<NonAutoCorrection> {
    if !(omega > 0.0) {
        return Err(SsmError::InvalidParameter(format!("Omega must be positive, got {omega}")));
    }
    let m = master.m();
    if flags.len() != m {
        return Err(SsmError::DimensionMismatch(format!("{} flags for {m} modes", flags.len())));
    }
    let fa = to_complex_vec(&sys.fext_at(omega));
    let mut s0 = vec![C64::new(0.0, 0.0); m];
    for (i, p) in master.modes.iter().enumerate() {
        if flags[i] {
            s0[i] = p.left.dotc(&fa);
        }
    }
    let dim = sys.dim();
    if skip_x0 || fa.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(NonAutoCorrection { omega, s0, x0: DVector::zeros(dim), flags: flags.to_vec() });
    }
    let a = to_complex(&sys.a);
    let b = to_complex(&sys.b);
    let shifted = &a - &b * C64::new(0.0, omega);
    let mut rhs = -fa;
    for (i, p) in master.modes.iter().enumerate() {
        if flags[i] {
            rhs += &b * &p.right * s0[i];
        }
    }
    let res: Vec<usize> = (0..m).filter(|&i| flags[i]).collect();
    let x0 = if res.is_empty() {
        ComplexLu::new(shifted.clone()).solve(&rhs)?
    } else {
        let v = DMatrix::from_columns(
            &res.iter().map(|&i| master.modes[i].right.clone()).collect::<Vec<_>>(),
        );
        let u = DMatrix::from_columns(
            &res.iter().map(|&i| master.modes[i].left.clone()).collect::<Vec<_>>(),
        );
        let p = &b * v;
        let q = u.adjoint() * &b;
        bordered_solve(&shifted, &p, &q, &rhs)?.0
    };
    let resid = (&shifted * &x0 - &rhs).norm();
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    if resid > 1e-8 * scale {
        return Err(SsmError::LinearSolve(format!("x0 residual {resid:.3e} exceeds 1e-8 relative")));
    }
    Ok(NonAutoCorrection { omega, s0, x0, flags: flags.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_first_order;
    use crate::models::chain_model;
    use crate::spectral::{select_master, solve_spectrum};

    fn chain(f1: f64) -> (FirstOrderSystem, MasterSubspace) {
        let model = chain_model(5e-4, 1e-3, 1.5e-3, 1e-3, f1).unwrap();
        let sys = build_first_order(&model);
        let spectrum = solve_spectrum(&sys, 3).unwrap();
        let master = select_master(&spectrum, &[0, 1, 2]).unwrap();
        (sys, master)
    }

    #[test]
    fn zero_forcing_gives_zero_correction() {
        let (sys, master) = chain(0.0);
        let na = compute_nonauto(&sys, &master, 1.0, 0.05, false).unwrap();
        assert!(na.s0.iter().all(|z| z.norm() == 0.0));
        assert!(na.x0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn flagged_mode_gets_modal_forcing() {
        let (sys, master) = chain(1.0);
        let na = compute_nonauto(&sys, &master, 1.0, 0.05, false).unwrap();
        assert_eq!(na.flags, vec![true; 3]);
        let fa = to_complex_vec(&sys.fext_at(1.0));
        assert_eq!(na.s0[0], master.modes[0].left.dotc(&fa));
    }

    #[test]
    fn forcing_near_non_master_mode_is_rejected() {
        let model = chain_model(5e-4, 1e-3, 1.5e-3, 1e-3, 1.0).unwrap();
        let sys = build_first_order(&model);
        let mut master = select_master(&solve_spectrum(&sys, 3).unwrap(), &[0]).unwrap();
        master.others = vec![C64::new(-1e-3, 1.0)];
        let err = compute_nonauto(&sys, &master, 1.0, 0.05, false).unwrap_err();
        assert!(matches!(err, SsmError::NonMasterForcingResonance(_)));
    }
}
