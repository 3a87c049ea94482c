//! Slow-phase reduced dynamics in polar and Cartesian coordinates.
//!
//! In the frame rotating with `r_i Omega`, the leading-order reduced
//! dynamics of the forced SSM is autonomous. Its hyperbolic equilibria are
//! periodic orbits of the full system with the same stability type.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SsmError};
use crate::linalg::to_complex_vec;
use crate::model::FirstOrderSystem;
use crate::poly::C64;
use crate::registry::{Named, Registry};
use crate::spectral::{MasterSubspace, Rational};
use crate::ssm::auto::AutonomousSsm;

pub const RHO_MIN: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Polar,
    Cartesian,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Polar => "polar",
            Representation::Cartesian => "cartesian",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = SsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polar" => Ok(Representation::Polar),
            "cartesian" => Ok(Representation::Cartesian),
            _ => Err(SsmError::UnknownStrategy {
                kind: "coordinates",
                name: s.to_string(),
                available: "polar, cartesian".into(),
            }),
        }
    }
}

/// Continuation parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Omega,
    Epsilon,
}

/// Polar: `(rho_1, theta_1, ...)`; Cartesian: `(q^R_1, q^I_1, ...)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlowState {
    pub repr: Representation,
    pub values: DVector<f64>,
}

impl SlowState {
    pub fn new(repr: Representation, values: DVector<f64>) -> Self {
        SlowState { repr, values }
    }

    pub fn m(&self) -> usize {
        self.values.len() / 2
    }

    /// Complex slow amplitudes `q_{i,s}`.
    pub fn modal(&self) -> Vec<C64> {
        let v = &self.values;
        (0..self.m())
            .map(|i| match self.repr {
                Representation::Polar => C64::from_polar(v[2 * i], v[2 * i + 1]),
                Representation::Cartesian => C64::new(v[2 * i], v[2 * i + 1]),
            })
            .collect()
    }

    pub fn from_modal(repr: Representation, q: &[C64]) -> Self {
        let mut v = DVector::zeros(2 * q.len());
        for (i, z) in q.iter().enumerate() {
            match repr {
                Representation::Polar => {
                    v[2 * i] = z.norm();
                    v[2 * i + 1] = z.im.atan2(z.re);
                }
                Representation::Cartesian => {
                    v[2 * i] = z.re;
                    v[2 * i + 1] = z.im;
                }
            }
        }
        SlowState { repr, values: v }
    }

    pub fn convert(&self, repr: Representation) -> Self {
        if repr == self.repr {
            self.clone()
        } else {
            SlowState::from_modal(repr, &self.modal())
        }
    }

    pub fn rho(&self) -> Vec<f64> {
        self.modal().iter().map(|z| z.norm()).collect()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.modal().iter().map(|z| z.im.atan2(z.re)).collect()
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonantTerm {
    pub l: Vec<u32>,
    pub j: Vec<u32>,
    pub gamma: C64,
}

#[derive(Clone, Debug)]
pub struct ReducedVectorField {
    pub lambdas: Vec<C64>,
    pub r_exact: Vec<Rational>,
    pub r: Vec<f64>,
    /// Retained normal-form terms of each mode.
    pub terms: Vec<Vec<ResonantTerm>>,
    /// `f_i` at unit frequency; the forcing at `Omega` is `f_i Omega^power`.
    pub forcing: Vec<C64>,
    pub forcing_omega_power: u32,
    pub epsilon: f64,
    pub omega: f64,
    pub rho_min: f64,
}

impl ReducedVectorField {
    /// Builds the field from an SSM whose master carries an external
    /// resonance vector; `f_i = u_i^* F^a` exactly where `r_i = 1`.
    pub fn new(
        ssm: &AutonomousSsm,
        master: &MasterSubspace,
        sys: &FirstOrderSystem,
        omega: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let r_exact = master
            .external
            .clone()
            .ok_or_else(|| SsmError::InvalidParameter("external resonance vector not set".into()))?;
        let fa = to_complex_vec(&sys.fext);
        let one = Rational::from_integer(1);
        let forcing = master
            .modes
            .iter()
            .zip(&r_exact)
            .map(|(p, ri)| if *ri == one { p.left.dotc(&fa) } else { ZERO })
            .collect();
        let terms = ssm
            .gamma
            .iter()
            .map(|set| {
                set.iter()
                    .filter(|(_, g)| *g != ZERO)
                    .map(|((l, j), g)| ResonantTerm { l: l.clone(), j: j.clone(), gamma: *g })
                    .collect()
            })
            .collect();
        Ok(ReducedVectorField {
            lambdas: master.lambdas(),
            r: r_exact.iter().map(|x| *x.numer() as f64 / *x.denom() as f64).collect(),
            r_exact,
            terms,
            forcing,
            forcing_omega_power: sys.forcing_omega_power,
            epsilon,
            omega,
            rho_min: RHO_MIN,
        })
    }

    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        ReducedVectorField { omega, ..self.clone() }
    }

    pub fn with_parameter(&self, par: Parameter, value: f64) -> Self {
        let mut out = self.clone();
        out.set_parameter(par, value);
        out
    }

    pub fn set_parameter(&mut self, par: Parameter, value: f64) {
        match par {
            Parameter::Omega => self.omega = value,
            Parameter::Epsilon => self.epsilon = value,
        }
    }

    pub fn parameter(&self, par: Parameter) -> f64 {
        match par {
            Parameter::Omega => self.omega,
            Parameter::Epsilon => self.epsilon,
        }
    }

    /// `f_i` at the current `Omega`.
    pub fn forcing_at(&self) -> Vec<C64> {
        let s = self.omega.powi(self.forcing_omega_power as i32);
        self.forcing.iter().map(|f| f * s).collect()
    }

    fn forcing_derivative(&self) -> Vec<C64> {
        let p = self.forcing_omega_power;
        if p == 0 {
            return vec![ZERO; self.m()];
        }
        let s = p as f64 * self.omega.powi(p as i32 - 1);
        self.forcing.iter().map(|f| f * s).collect()
    }

    /// Complex slow velocity `dq_s/dt` in the rotating frame.
    pub fn complex_field(&self, q: &[C64]) -> Vec<C64> {
        let f = self.forcing_at();
        (0..self.m())
            .map(|i| {
                let mut z = (self.lambdas[i] - I * (self.r[i] * self.omega)) * q[i];
                for t in &self.terms[i] {
                    z += t.gamma * monomial(q, &t.l, &t.j, None);
                }
                z + f[i] * self.epsilon
            })
            .collect()
    }

    /// Modal coordinates `p(t) = (q_1, conj q_1, ...)` with
    /// `q_i = q_{i,s} e^{i r_i Omega t}`.
    pub fn to_normal_coordinates(&self, state: &SlowState, t: f64) -> Vec<C64> {
        state
            .modal()
            .iter()
            .zip(&self.r)
            .flat_map(|(q, ri)| {
                let z = q * C64::from_polar(1.0, ri * self.omega * t);
                [z, z.conj()]
            })
            .collect()
    }

    /// Whether every normal-form term of mode `i` contains `q_i` or `conj q_i`,
    /// which makes `q_i = 0` invariant in the absence of forcing on mode `i`.
    pub fn mode_is_invariant(&self, i: usize) -> bool {
        self.forcing_at()[i] == ZERO && self.terms[i].iter().all(|t| t.l[i] + t.j[i] > 0)
    }
}

/// Which derivative of `q^l conj(q)^j` to take.
#[derive(Clone, Copy)]
enum Wrt {
    Q(usize),
    QBar(usize),
}

fn monomial(q: &[C64], l: &[u32], j: &[u32], wrt: Option<Wrt>) -> C64 {
    let mut x = C64::new(1.0, 0.0);
    for c in 0..q.len() {
        let (mut lc, mut jc) = (l[c], j[c]);
        match wrt {
            Some(Wrt::Q(k)) if k == c => {
                if lc == 0 {
                    return ZERO;
                }
                x *= lc as f64;
                lc -= 1;
            }
            Some(Wrt::QBar(k)) if k == c => {
                if jc == 0 {
                    return ZERO;
                }
                x *= jc as f64;
                jc -= 1;
            }
            _ => {}
        }
        if lc > 0 {
            x *= q[c].powu(lc);
        }
        if jc > 0 {
            x *= q[c].conj().powu(jc);
        }
    }
    x
}

fn rho_power(rho: &[f64], l: &[u32], j: &[u32], skip: Option<usize>) -> f64 {
    let mut x = 1.0;
    for c in 0..rho.len() {
        let mut e = l[c] + j[c];
        if skip == Some(c) {
            if e == 0 {
                return 0.0;
            }
            x *= e as f64;
            e -= 1;
        }
        if e > 0 {
            x *= rho[c].powi(e as i32);
        }
    }
    x
}

fn phase(theta: &[f64], l: &[u32], j: &[u32], i: usize) -> f64 {
    let mut phi = 0.0;
    for c in 0..theta.len() {
        let mut k = l[c] as f64 - j[c] as f64;
        if c == i {
            k -= 1.0;
        }
        phi += k * theta[c];
    }
    phi
}

fn check_len(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<()> {
    if x.len() != 2 * rvf.m() {
        return Err(SsmError::DimensionMismatch(format!(
            "slow state of length {} for m = {}",
            x.len(),
            rvf.m()
        )));
    }
    Ok(())
}

fn split_polar(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(rvf, x)?;
    let m = rvf.m();
    let rho: Vec<f64> = (0..m).map(|i| x[2 * i]).collect();
    let theta: Vec<f64> = (0..m).map(|i| x[2 * i + 1]).collect();
    for (i, &r) in rho.iter().enumerate() {
        if !(r > rvf.rho_min) {
            return Err(SsmError::PolarSingularity { index: i + 1, rho: r });
        }
    }
    Ok((rho, theta))
}

/// `(rho_dot, theta_dot)` interleaved.
pub fn polar_field(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (rho, theta) = split_polar(rvf, x)?;
    let f = rvf.forcing_at();
    let m = rvf.m();
    let mut out = DVector::zeros(2 * m);
    for i in 0..m {
        let mut z = f[i] * C64::from_polar(rvf.epsilon, -theta[i]);
        for t in &rvf.terms[i] {
            z += t.gamma
                * C64::from_polar(rho_power(&rho, &t.l, &t.j, None), phase(&theta, &t.l, &t.j, i));
        }
        let lam = rvf.lambdas[i];
        out[2 * i] = rho[i] * lam.re + z.re;
        out[2 * i + 1] = lam.im - rvf.r[i] * rvf.omega + z.im / rho[i];
    }
    Ok(out)
}

pub fn polar_jacobian(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (rho, theta) = split_polar(rvf, x)?;
    let f = rvf.forcing_at();
    let m = rvf.m();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        let fe = f[i] * C64::from_polar(rvf.epsilon, -theta[i]);
        let mut z = fe;
        let mut dz_drho = vec![ZERO; m];
        let mut dz_dtheta = vec![ZERO; m];
        dz_dtheta[i] = -I * fe;
        for t in &rvf.terms[i] {
            let phi = phase(&theta, &t.l, &t.j, i);
            let e = t.gamma * C64::from_polar(1.0, phi);
            let rp = rho_power(&rho, &t.l, &t.j, None);
            z += e * rp;
            for c in 0..m {
                dz_drho[c] += e * rho_power(&rho, &t.l, &t.j, Some(c));
                let mut k = t.l[c] as f64 - t.j[c] as f64;
                if c == i {
                    k -= 1.0;
                }
                dz_dtheta[c] += I * e * (rp * k);
            }
        }
        let lam = rvf.lambdas[i];
        for c in 0..m {
            jac[(2 * i, 2 * c)] = dz_drho[c].re;
            jac[(2 * i, 2 * c + 1)] = dz_dtheta[c].re;
            jac[(2 * i + 1, 2 * c)] = dz_drho[c].im / rho[i];
            jac[(2 * i + 1, 2 * c + 1)] = dz_dtheta[c].im / rho[i];
        }
        jac[(2 * i, 2 * i)] += lam.re;
        jac[(2 * i + 1, 2 * i)] -= z.im / (rho[i] * rho[i]);
    }
    Ok(jac)
}

fn polar_parameter_derivative(
    rvf: &ReducedVectorField,
    x: &DVector<f64>,
    par: Parameter,
) -> Result<DVector<f64>> {
    let (rho, theta) = split_polar(rvf, x)?;
    let m = rvf.m();
    let (df, lin) = match par {
        Parameter::Omega => (
            rvf.forcing_derivative().iter().map(|f| f * rvf.epsilon).collect::<Vec<_>>(),
            true,
        ),
        Parameter::Epsilon => (rvf.forcing_at(), false),
    };
    let mut out = DVector::zeros(2 * m);
    for i in 0..m {
        let z = df[i] * C64::from_polar(1.0, -theta[i]);
        out[2 * i] = z.re;
        out[2 * i + 1] = z.im / rho[i] - if lin { rvf.r[i] } else { 0.0 };
    }
    Ok(out)
}

fn modal_of(x: &DVector<f64>) -> Vec<C64> {
    (0..x.len() / 2).map(|i| C64::new(x[2 * i], x[2 * i + 1])).collect()
}

/// `(dq^R/dt, dq^I/dt)` interleaved.
pub fn cartesian_field(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(rvf, x)?;
    let z = rvf.complex_field(&modal_of(x));
    Ok(DVector::from_iterator(2 * z.len(), z.iter().flat_map(|w| [w.re, w.im])))
}

pub fn cartesian_jacobian(rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len(rvf, x)?;
    let q = modal_of(x);
    let m = rvf.m();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        let mut dq = vec![ZERO; m];
        let mut dqb = vec![ZERO; m];
        dq[i] = rvf.lambdas[i] - I * (rvf.r[i] * rvf.omega);
        for t in &rvf.terms[i] {
            for c in 0..m {
                dq[c] += t.gamma * monomial(&q, &t.l, &t.j, Some(Wrt::Q(c)));
                dqb[c] += t.gamma * monomial(&q, &t.l, &t.j, Some(Wrt::QBar(c)));
            }
        }
        for c in 0..m {
            let dr = dq[c] + dqb[c];
            let di = I * (dq[c] - dqb[c]);
            jac[(2 * i, 2 * c)] = dr.re;
            jac[(2 * i + 1, 2 * c)] = dr.im;
            jac[(2 * i, 2 * c + 1)] = di.re;
            jac[(2 * i + 1, 2 * c + 1)] = di.im;
        }
    }
    Ok(jac)
}

fn cartesian_parameter_derivative(
    rvf: &ReducedVectorField,
    x: &DVector<f64>,
    par: Parameter,
) -> Result<DVector<f64>> {
    check_len(rvf, x)?;
    let q = modal_of(x);
    let m = rvf.m();
    let mut out = DVector::zeros(2 * m);
    let df = match par {
        Parameter::Omega => rvf.forcing_derivative().iter().map(|f| f * rvf.epsilon).collect(),
        Parameter::Epsilon => rvf.forcing_at(),
    };
    for i in 0..m {
        let mut z = df[i];
        if par == Parameter::Omega {
            z -= I * rvf.r[i] * q[i];
        }
        out[2 * i] = z.re;
        out[2 * i + 1] = z.im;
    }
    Ok(out)
}

/// Field in the representation of `state`.
pub fn field(rvf: &ReducedVectorField, state: &SlowState) -> Result<DVector<f64>> {
    coordinates_for(state.repr).field(rvf, &state.values)
}

/// Analytic Jacobian in the representation of `state`.
pub fn field_jacobian(rvf: &ReducedVectorField, state: &SlowState) -> Result<DMatrix<f64>> {
    coordinates_for(state.repr).jacobian(rvf, &state.values)
}

/// A slow-phase coordinate chart.
pub trait SlowCoordinates: Named + Send + Sync {
    fn representation(&self) -> Representation;
    fn field(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    fn parameter_derivative(
        &self,
        rvf: &ReducedVectorField,
        x: &DVector<f64>,
        par: Parameter,
    ) -> Result<DVector<f64>>;
    /// Default Newton guess for `m` modes.
    fn default_guess(&self, m: usize) -> DVector<f64>;
    /// Brings a state back to the canonical chart domain.
    fn normalize(&self, _x: &mut DVector<f64>) {}
    /// Shifts periodic coordinates of `x` to within half a period of `reference`.
    fn unwrap_near(&self, _x: &mut DVector<f64>, _reference: &DVector<f64>) {}
}

pub struct Polar;
pub struct Cartesian;

impl Named for Polar {
    fn name(&self) -> &'static str {
        "polar"
    }
    fn description(&self) -> &'static str {
        "amplitude and phase (rho_i, theta_i); singular at rho_i = 0"
    }
}

impl Named for Cartesian {
    fn name(&self) -> &'static str {
        "cartesian"
    }
    fn description(&self) -> &'static str {
        "real and imaginary parts of q_{i,s}; regular everywhere"
    }
}

impl SlowCoordinates for Polar {
    fn representation(&self) -> Representation {
        Representation::Polar
    }
    fn field(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DVector<f64>> {
        polar_field(rvf, x)
    }
    fn jacobian(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        polar_jacobian(rvf, x)
    }
    fn parameter_derivative(
        &self,
        rvf: &ReducedVectorField,
        x: &DVector<f64>,
        par: Parameter,
    ) -> Result<DVector<f64>> {
        polar_parameter_derivative(rvf, x, par)
    }
    fn default_guess(&self, m: usize) -> DVector<f64> {
        DVector::from_element(2 * m, 0.1)
    }
    fn normalize(&self, x: &mut DVector<f64>) {
        for i in 0..x.len() / 2 {
            x[2 * i + 1] = wrap_angle(x[2 * i + 1]);
        }
    }
    fn unwrap_near(&self, x: &mut DVector<f64>, reference: &DVector<f64>) {
        for i in 0..x.len() / 2 {
            let r = reference[2 * i + 1];
            x[2 * i + 1] = r + wrap_angle(x[2 * i + 1] - r);
        }
    }
}

impl SlowCoordinates for Cartesian {
    fn representation(&self) -> Representation {
        Representation::Cartesian
    }
    fn field(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DVector<f64>> {
        cartesian_field(rvf, x)
    }
    fn jacobian(&self, rvf: &ReducedVectorField, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        cartesian_jacobian(rvf, x)
    }
    fn parameter_derivative(
        &self,
        rvf: &ReducedVectorField,
        x: &DVector<f64>,
        par: Parameter,
    ) -> Result<DVector<f64>> {
        cartesian_parameter_derivative(rvf, x, par)
    }
    fn default_guess(&self, m: usize) -> DVector<f64> {
        DVector::zeros(2 * m)
    }
}

pub fn coordinate_registry() -> Registry<dyn SlowCoordinates> {
    let mut r: Registry<dyn SlowCoordinates> = Registry::new("coordinates");
    r.register(Arc::new(Cartesian)).register(Arc::new(Polar));
    r
}

pub fn coordinates_for(repr: Representation) -> Arc<dyn SlowCoordinates> {
    match repr {
        Representation::Polar => Arc::new(Polar),
        Representation::Cartesian => Arc::new(Cartesian),
    }
}
