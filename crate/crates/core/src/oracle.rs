//! Periodic orbits of the unreduced system: shooting, collocation and
//! forward integration, with Floquet stability.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::continuation::{polish_equilibrium, Bifurcation, EquilibriumPoint, NewtonOptions, Stability};
use crate::error::{Result, SsmError};
use crate::frc::FrcPoint;
use crate::model::MechanicalModel;
use crate::models::gauss_legendre;
use crate::ode::{dp45, Dp45Options};
use crate::poly::{RealPolynomial, C64};
use crate::pipeline::Reduction;
use crate::reduced::{ReducedVectorField, Representation, SlowState};
use crate::registry::{Named, Registry};
use crate::spectral::MasterSubspace;

/// `M x'' + C x' + K x + f(x, x') = 2 eps f^a(Omega) cos(Omega t)` in the
/// state `z = (x, x')`.
#[derive(Clone, Debug)]
pub struct FullSystem {
    pub n: usize,
    minv: DMatrix<f64>,
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    f: RealPolynomial,
    /// `2 eps f^a(Omega)`.
    load: DVector<f64>,
    pub omega: f64,
    pub epsilon: f64,
}

impl FullSystem {
    pub fn new(model: &MechanicalModel, omega: f64, epsilon: f64) -> Result<Self> {
        let minv = model
            .mass
            .clone()
            .try_inverse()
            .ok_or_else(|| SsmError::LinearSolve("singular mass matrix".into()))?;
        Ok(FullSystem {
            n: model.n,
            minv,
            mass: model.mass.clone(),
            damping: model.damping.clone(),
            stiffness: model.stiffness.clone(),
            f: model.nonlinearity.to_real(),
            load: model.forcing_at(omega) * (2.0 * epsilon),
            omega,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    fn load_at(&self, t: f64) -> DVector<f64> {
        &self.load * (self.omega * t).cos()
    }

    pub fn rhs(&self, t: f64, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let x = z.rows(0, n);
        let v = z.rows(n, n);
        let f = DVector::from_vec(self.f.eval(z.as_slice()));
        let acc = &self.minv * (self.load_at(t) - &self.damping * v - &self.stiffness * x - f);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&acc);
        out
    }

    /// `d rhs / d z`; independent of `t`.
    pub fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let fj = self.f.jacobian(z.as_slice());
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        jac.view_mut((0, n), (n, n)).fill_with_identity();
        let kx = -(&self.minv * (&self.stiffness + fj.columns(0, n)));
        let cv = -(&self.minv * (&self.damping + fj.columns(n, n)));
        jac.view_mut((n, 0), (n, n)).copy_from(&kx);
        jac.view_mut((n, n), (n, n)).copy_from(&cv);
        jac
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitMethod {
    Collocation,
    Shooting,
    Forward,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullOrbit {
    pub omega: f64,
    pub epsilon: f64,
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<DVector<f64>>,
    /// Empty for forward integration, which does not linearize.
    pub multipliers: Vec<C64>,
    pub method: OrbitMethod,
    pub residual_norm: f64,
    /// Periods integrated before the steady-state criterion held.
    pub periods: Option<usize>,
}

impl FullOrbit {
    /// `Some(all |mu| < 1)` when multipliers are available.
    pub fn stable(&self) -> Option<bool> {
        (!self.multipliers.is_empty()).then(|| self.multipliers.iter().all(|m| m.norm() < 1.0))
    }

    /// Whether no multiplier lies within `tol` of the unit circle.
    pub fn hyperbolic(&self, tol: f64) -> bool {
        self.multipliers.iter().all(|m| (m.norm() - 1.0).abs() > tol)
    }

    pub fn amplitude(&self, dof: usize) -> f64 {
        self.samples.iter().map(|z| z[dof].abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct OrbitRequest {
    pub omega: f64,
    pub epsilon: f64,
    /// Orbit period; a multiple of `2 pi / Omega`.
    pub period: f64,
    pub samples: usize,
    /// Newton tolerance relative to `1 + |z|`.
    pub newton_tol: f64,
    pub max_iter: usize,
    pub intervals: usize,
    /// Relative Poincare criterion of forward integration.
    pub steady_tol: f64,
    pub max_periods: usize,
    pub steps_per_period: usize,
}

impl OrbitRequest {
    pub fn new(omega: f64, epsilon: f64) -> Self {
        OrbitRequest {
            omega,
            epsilon,
            period: 2.0 * PI / omega,
            samples: 128,
            newton_tol: 1e-10,
            max_iter: 40,
            intervals: 10,
            steady_tol: 1e-3,
            max_periods: 5000,
            steps_per_period: 512,
        }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = period;
        self
    }
}

/// Periodic time series over one period at uniform times from `t = 0`.
#[derive(Clone, Debug)]
pub struct OrbitGuess {
    pub states: Vec<DVector<f64>>,
}

impl OrbitGuess {
    pub fn constant(z: DVector<f64>) -> Self {
        OrbitGuess { states: vec![z] }
    }

    /// Linear periodic interpolation at phase `s` in `[0, 1)`.
    pub fn at_phase(&self, s: f64) -> DVector<f64> {
        let k = self.states.len();
        let x = s.rem_euclid(1.0) * k as f64;
        let i = (x.floor() as usize).min(k - 1);
        let w = x - i as f64;
        &self.states[i] * (1.0 - w) + &self.states[(i + 1) % k] * w
    }
}

fn integrator_options() -> Dp45Options {
    Dp45Options { rtol: 1e-11, atol: 1e-13, ..Default::default() }
}

fn uniform_samples(
    sys: &FullSystem,
    z0: &DVector<f64>,
    period: f64,
    count: usize,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, DVector<f64>)> {
    let opts = integrator_options();
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    let mut z = z0.clone();
    for k in 0..count {
        let t = period * k as f64 / count as f64;
        times.push(t);
        states.push(z.clone());
        let t1 = period * (k + 1) as f64 / count as f64;
        z = dp45(|t, y| sys.rhs(t, y), t, &z, t1, &opts)?;
    }
    Ok((times, states, z))
}

/// State and monodromy after one period from `z0` at `t = 0`.
pub fn flow_with_monodromy(sys: &FullSystem, z0: &DVector<f64>, period: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = sys.dim();
    let mut y0 = DVector::zeros(d + d * d);
    y0.rows_mut(0, d).copy_from(z0);
    for i in 0..d {
        y0[d + i * d + i] = 1.0;
    }
    let y = dp45(
        |t, y| {
            let z = y.rows(0, d).into_owned();
            let phi = DMatrix::from_column_slice(d, d, &y.as_slice()[d..]);
            let mut out = DVector::zeros(d + d * d);
            out.rows_mut(0, d).copy_from(&sys.rhs(t, &z));
            let dphi = sys.jacobian(&z) * phi;
            out.rows_mut(d, d * d).copy_from_slice(dphi.as_slice());
            out
        },
        0.0,
        &y0,
        period,
        &integrator_options(),
    )?;
    Ok((y.rows(0, d).into_owned(), DMatrix::from_column_slice(d, d, &y.as_slice()[d..])))
}

/// Newton on the period map `z0 -> phi_T(z0)` with the monodromy from the
/// variational equations.
pub fn shoot_orbit(model: &MechanicalModel, req: &OrbitRequest, guess: &DVector<f64>) -> Result<FullOrbit> {
    let sys = FullSystem::new(model, req.omega, req.epsilon)?;
    let d = sys.dim();
    let mut z0 = guess.clone();
    let (mut zt, mut phi) = flow_with_monodromy(&sys, &z0, req.period)?;
    let mut g = &zt - &z0;
    let mut iter = 0;
    while g.norm() > req.newton_tol * (1.0 + z0.norm()) {
        if iter == req.max_iter {
            return Err(SsmError::NewtonDivergence(format!(
                "shooting at Omega = {}: |G| = {:e} after {iter} iterations",
                req.omega,
                g.norm()
            )));
        }
        iter += 1;
        let step = (&phi - DMatrix::identity(d, d))
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| SsmError::LinearSolve("monodromy has a unit multiplier".into()))?;
        let mut alpha = 1.0;
        loop {
            let trial = &z0 + &step * alpha;
            let accepted = match flow_with_monodromy(&sys, &trial, req.period) {
                Ok((zt_t, phi_t)) if (&zt_t - &trial).norm() < g.norm() || alpha < 1e-3 => {
                    z0 = trial;
                    zt = zt_t;
                    phi = phi_t;
                    true
                }
                _ => false,
            };
            if accepted {
                break;
            }
            alpha *= 0.5;
        }
        g = &zt - &z0;
    }
    let (times, samples, _) = uniform_samples(&sys, &z0, req.period, req.samples)?;
    let multipliers = phi.complex_eigenvalues().iter().copied().collect();
    Ok(FullOrbit {
        omega: req.omega,
        epsilon: req.epsilon,
        period: req.period,
        times,
        samples,
        multipliers,
        method: OrbitMethod::Shooting,
        residual_norm: g.norm() / z0.norm().max(f64::MIN_POSITIVE),
        periods: None,
    })
}

/// Degree of the collocation polynomials; one fewer Gauss nodes than base points.
const COLLOC_DEGREE: usize = 4;

struct CollocationBasis {
    /// `ell_j(tau_c)` and `ell_j'(tau_c)` on `[0, 1]`, indexed `[c][j]`.
    value: Vec<Vec<f64>>,
    deriv: Vec<Vec<f64>>,
    nodes: Vec<f64>,
}

fn lagrange(base: &[f64], j: usize, x: f64) -> (f64, f64) {
    let mut v = 1.0;
    let mut dv = 0.0;
    for (k, &bk) in base.iter().enumerate() {
        if k == j {
            continue;
        }
        let den = base[j] - bk;
        dv = dv * (x - bk) / den + v / den;
        v *= (x - bk) / den;
    }
    (v, dv)
}

impl CollocationBasis {
    fn new() -> Self {
        let base: Vec<f64> = (0..=COLLOC_DEGREE).map(|j| j as f64 / COLLOC_DEGREE as f64).collect();
        let nodes: Vec<f64> = gauss_legendre(COLLOC_DEGREE).0.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let mut value = Vec::new();
        let mut deriv = Vec::new();
        for &tc in &nodes {
            let (v, dv): (Vec<f64>, Vec<f64>) = (0..=COLLOC_DEGREE).map(|j| lagrange(&base, j, tc)).unzip();
            value.push(v);
            deriv.push(dv);
        }
        CollocationBasis { value, deriv, nodes }
    }

    fn eval_at(tau: f64, coeffs: &[DVector<f64>]) -> DVector<f64> {
        let base: Vec<f64> = (0..=COLLOC_DEGREE).map(|j| j as f64 / COLLOC_DEGREE as f64).collect();
        let mut out = DVector::zeros(coeffs[0].len());
        for (j, c) in coeffs.iter().enumerate() {
            out.axpy(lagrange(&base, j, tau).0, c, 1.0);
        }
        out
    }
}

/// Piecewise degree-4 collocation at Gauss nodes with periodic closure.
pub fn collocate_orbit(model: &MechanicalModel, req: &OrbitRequest, guess: &OrbitGuess) -> Result<FullOrbit> {
    let sys = FullSystem::new(model, req.omega, req.epsilon)?;
    let d = sys.dim();
    let nint = req.intervals;
    let m = COLLOC_DEGREE;
    let h = req.period / nint as f64;
    let basis = CollocationBasis::new();
    let size = nint * m * d;
    // u[(k, j)] for j < m; the endpoint of interval k is u[(k + 1, 0)].
    let idx = |k: usize, j: usize| ((k + j / m) % nint) * m * d + (j % m) * d;
    let mut u = DVector::zeros(size);
    for k in 0..nint {
        for j in 0..m {
            let s = (k as f64 + j as f64 / m as f64) / nint as f64;
            u.rows_mut(idx(k, j), d).copy_from(&guess.at_phase(s));
        }
    }
    let block = |u: &DVector<f64>, k: usize| -> Vec<DVector<f64>> {
        (0..=m).map(|j| u.rows(idx(k, j), d).into_owned()).collect()
    };
    let assemble = |u: &DVector<f64>, with_jac: bool| -> (DVector<f64>, Option<DMatrix<f64>>) {
        let mut res = DVector::zeros(size);
        let mut jac = with_jac.then(|| DMatrix::zeros(size, size));
        for k in 0..nint {
            let coeffs = block(u, k);
            for c in 0..m {
                let t = (k as f64 + basis.nodes[c]) * h;
                let mut z = DVector::zeros(d);
                let mut dz = DVector::zeros(d);
                for (j, cj) in coeffs.iter().enumerate() {
                    z.axpy(basis.value[c][j], cj, 1.0);
                    dz.axpy(basis.deriv[c][j] / h, cj, 1.0);
                }
                let row = k * m * d + c * d;
                res.rows_mut(row, d).copy_from(&(dz - sys.rhs(t, &z)));
                if let Some(jac) = jac.as_mut() {
                    let jz = sys.jacobian(&z);
                    for j in 0..=m {
                        let col = idx(k, j);
                        let mut blk = jac.view_mut((row, col), (d, d));
                        blk -= &jz * basis.value[c][j];
                        for i in 0..d {
                            blk[(i, i)] += basis.deriv[c][j] / h;
                        }
                    }
                }
            }
        }
        (res, jac)
    };
    let mut iter = 0;
    let (mut res, mut jac) = assemble(&u, true);
    while res.amax() > req.newton_tol * (1.0 + u.amax()) {
        if iter == req.max_iter {
            return Err(SsmError::NewtonDivergence(format!(
                "collocation at Omega = {}: residual {:e} after {iter} iterations",
                req.omega,
                res.amax()
            )));
        }
        iter += 1;
        let step = jac
            .take()
            .expect("jacobian assembled")
            .lu()
            .solve(&(-&res))
            .ok_or_else(|| SsmError::LinearSolve("singular collocation system".into()))?;
        if step.iter().any(|s| !s.is_finite()) {
            return Err(SsmError::LinearSolve("ill-conditioned collocation system".into()));
        }
        let mut alpha = 1.0;
        loop {
            let trial = &u + &step * alpha;
            let (r, j) = assemble(&trial, true);
            if r.amax() < res.amax() || alpha < 1e-3 {
                u = trial;
                res = r;
                jac = j;
                break;
            }
            alpha *= 0.5;
        }
    }
    // Monodromy: the same discretization applied to the variational equation.
    let mut phi = DMatrix::<f64>::identity(d, d);
    for k in 0..nint {
        let coeffs = block(&u, k);
        let mut lhs = DMatrix::zeros(m * d, m * d);
        let mut rhs = DMatrix::zeros(m * d, d);
        for c in 0..m {
            let mut z = DVector::zeros(d);
            for (j, cj) in coeffs.iter().enumerate() {
                z.axpy(basis.value[c][j], cj, 1.0);
            }
            let jz = sys.jacobian(&z);
            for j in 0..=m {
                let mut blk = -&jz * basis.value[c][j];
                for i in 0..d {
                    blk[(i, i)] += basis.deriv[c][j] / h;
                }
                if j == 0 {
                    let mut r = rhs.view_mut((c * d, 0), (d, d));
                    r -= blk * &phi;
                } else {
                    lhs.view_mut((c * d, (j - 1) * d), (d, d)).copy_from(&blk);
                }
            }
        }
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SsmError::LinearSolve("singular variational collocation block".into()))?;
        phi = sol.rows((m - 1) * d, d).into_owned();
    }
    let mut times = Vec::with_capacity(req.samples);
    let mut samples = Vec::with_capacity(req.samples);
    for s in 0..req.samples {
        let t = req.period * s as f64 / req.samples as f64;
        let k = ((t / h).floor() as usize).min(nint - 1);
        times.push(t);
        samples.push(CollocationBasis::eval_at(t / h - k as f64, &block(&u, k)));
    }
    Ok(FullOrbit {
        omega: req.omega,
        epsilon: req.epsilon,
        period: req.period,
        times,
        samples,
        multipliers: phi.complex_eigenvalues().iter().copied().collect(),
        method: OrbitMethod::Collocation,
        residual_norm: res.amax(),
        periods: None,
    })
}

/// Average-acceleration Newmark integrator on the second-order form.
pub struct Newmark<'a> {
    sys: &'a FullSystem,
    pub h: f64,
}

impl<'a> Newmark<'a> {
    pub fn new(sys: &'a FullSystem, h: f64) -> Self {
        Newmark { sys, h }
    }

    fn state(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.sys.n;
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(v);
        z
    }

    fn force(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.sys.f.eval(self.state(x, v).as_slice()))
    }

    fn force_jacobian(&self, x: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        self.sys.f.jacobian(self.state(x, v).as_slice())
    }

    /// Acceleration consistent with `(x, v)` at time `t`.
    pub fn acceleration(&self, t: f64, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let s = self.sys;
        let f = self.force(x, v);
        &s.minv * (s.load_at(t) - &s.damping * v - &s.stiffness * x - f)
    }

    /// One step from `t`; returns `(x, v, a)` at `t + h`.
    pub fn step(
        &self,
        t: f64,
        x: &DVector<f64>,
        v: &DVector<f64>,
        a: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let s = self.sys;
        let n = s.n;
        let h = self.h;
        let xp = x + v * h + a * (h * h / 4.0);
        let vp = v + a * (h / 2.0);
        let load = s.load_at(t + h);
        let mut an = a.clone();
        // Modified Newton: the iteration matrix is factored once per step.
        let fj = self.force_jacobian(&(&xp + &an * (h * h / 4.0)), &(&vp + &an * (h / 2.0)));
        let lu = (&s.mass
            + (&s.damping + fj.columns(n, n)) * (h / 2.0)
            + (&s.stiffness + fj.columns(0, n)) * (h * h / 4.0))
            .lu();
        for _ in 0..50 {
            let xn = &xp + &an * (h * h / 4.0);
            let vn = &vp + &an * (h / 2.0);
            let f = self.force(&xn, &vn);
            let r = &s.mass * &an + &s.damping * &vn + &s.stiffness * &xn + f - &load;
            let da = lu
                .solve(&(-&r))
                .ok_or_else(|| SsmError::LinearSolve("singular Newmark iteration matrix".into()))?;
            an += &da;
            if da.norm() <= 1e-13 * (1.0 + an.norm()) {
                let xn = &xp + &an * (h * h / 4.0);
                let vn = &vp + &an * (h / 2.0);
                return Ok((xn, vn, an));
            }
        }
        Err(SsmError::Integration(format!("Newmark corrector stalled at t = {}", t + h)))
    }
}

/// Integrates from `z0` until `|z(iT) - z((i-1)T)| / |z((i-1)T)| < steady_tol`.
pub fn forward_steady_state(model: &MechanicalModel, req: &OrbitRequest, z0: &DVector<f64>) -> Result<FullOrbit> {
    let sys = FullSystem::new(model, req.omega, req.epsilon)?;
    let n = sys.n;
    let stride = req.steps_per_period.div_ceil(req.samples).max(1);
    let steps = stride * req.samples;
    let nm = Newmark::new(&sys, req.period / steps as f64);
    let mut x = z0.rows(0, n).into_owned();
    let mut v = z0.rows(n, n).into_owned();
    let mut a = nm.acceleration(0.0, &x, &v);
    let join = |x: &DVector<f64>, v: &DVector<f64>| {
        let mut z = DVector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(v);
        z
    };
    let mut last = join(&x, &v);
    for period in 1..=req.max_periods {
        let mut samples = Vec::with_capacity(req.samples);
        for k in 0..steps {
            if k % stride == 0 {
                samples.push(join(&x, &v));
            }
            // Restart time at each period so the load phase stays exact.
            let t = nm.h * k as f64;
            (x, v, a) = nm.step(t, &x, &v, &a)?;
        }
        let z = join(&x, &v);
        let change = (&z - &last).norm() / last.norm().max(f64::MIN_POSITIVE);
        if change < req.steady_tol {
            let times = (0..req.samples).map(|k| req.period * k as f64 / req.samples as f64).collect();
            return Ok(FullOrbit {
                omega: req.omega,
                epsilon: req.epsilon,
                period: req.period,
                times,
                samples,
                multipliers: Vec::new(),
                method: OrbitMethod::Forward,
                residual_norm: change,
                periods: Some(period),
            });
        }
        last = z;
    }
    Err(SsmError::NoSteadyState { periods: req.max_periods })
}

/// Interchangeable full-system orbit solvers.
pub trait OrbitSolver: Named + Send + Sync {
    fn method(&self) -> OrbitMethod;
    fn solve(&self, model: &MechanicalModel, req: &OrbitRequest, guess: &OrbitGuess) -> Result<FullOrbit>;
}

pub struct Shooting;
pub struct Collocation;
pub struct Forward;

impl Named for Shooting {
    fn name(&self) -> &'static str {
        "shoot"
    }
}

impl OrbitSolver for Shooting {
    fn method(&self) -> OrbitMethod {
        OrbitMethod::Shooting
    }

    fn solve(&self, model: &MechanicalModel, req: &OrbitRequest, guess: &OrbitGuess) -> Result<FullOrbit> {
        shoot_orbit(model, req, &guess.states[0])
    }
}

impl Named for Collocation {
    fn name(&self) -> &'static str {
        "colloc"
    }
}

impl OrbitSolver for Collocation {
    fn method(&self) -> OrbitMethod {
        OrbitMethod::Collocation
    }

    fn solve(&self, model: &MechanicalModel, req: &OrbitRequest, guess: &OrbitGuess) -> Result<FullOrbit> {
        collocate_orbit(model, req, guess)
    }
}

impl Named for Forward {
    fn name(&self) -> &'static str {
        "forward"
    }
}

impl OrbitSolver for Forward {
    fn method(&self) -> OrbitMethod {
        OrbitMethod::Forward
    }

    fn solve(&self, model: &MechanicalModel, req: &OrbitRequest, guess: &OrbitGuess) -> Result<FullOrbit> {
        forward_steady_state(model, req, &guess.states[0])
    }
}

pub fn orbit_registry() -> Registry<dyn OrbitSolver> {
    let mut reg: Registry<dyn OrbitSolver> = Registry::new("orbit solver");
    reg.register(Arc::new(Shooting)).register(Arc::new(Collocation)).register(Arc::new(Forward));
    reg
}

/// Slow state of a full orbit: `q_i = mean_k (u_i* B z(t_k)) e^{-i r_i Omega t_k}`.
pub fn project_to_slow_state(
    orbit: &FullOrbit,
    master: &MasterSubspace,
    b: &DMatrix<f64>,
    r: &[f64],
    repr: Representation,
) -> SlowState {
    let q: Vec<C64> = master
        .modes
        .iter()
        .zip(r)
        .map(|(mode, ri)| {
            let ub = b.transpose().map(|x| C64::new(x, 0.0)) * &mode.left;
            let sum: C64 = orbit
                .times
                .iter()
                .zip(&orbit.samples)
                .map(|(t, z)| {
                    let p: C64 = ub.iter().zip(z.iter()).map(|(a, zz)| a.conj() * zz).sum();
                    p * C64::from_polar(1.0, -ri * orbit.omega * t)
                })
                .sum();
            sum / orbit.samples.len() as f64
        })
        .collect();
    SlowState::from_modal(repr, &q)
}

/// Equilibrium of the slow dynamics seeded by a projected full-system orbit.
pub fn seed_from_orbit(
    orbit: &FullOrbit,
    red: &Reduction,
    rvf: &ReducedVectorField,
    repr: Representation,
) -> Result<EquilibriumPoint> {
    let guess = project_to_slow_state(orbit, &red.master, &red.sys.b, &rvf.r, repr);
    polish_equilibrium(rvf, repr, &guess, &NewtonOptions::default())
}

/// Branch points eligible for amplitude validation: stable, hyperbolic by at
/// least `margin`, with every reported DOF at least `floor` times the
/// largest amplitude at that point.
pub fn eligible_points(points: &[FrcPoint], floor: f64, margin: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let peak = p.amplitudes.iter().copied().fold(0.0, f64::max);
            p.error.is_none()
                && p.stability == Stability::Stable
                && p.bifurcation == Bifurcation::None
                && p.hyperbolicity >= margin
                && peak > 0.0
                && p.amplitudes.iter().all(|a| *a >= floor * peak)
        })
        .map(|(i, _)| i)
        .collect()
}

/// `count` samples spanning the eligible segments in `Omega`: the combined
/// `Omega` extent of all maximal runs of consecutive eligible indices is cut
/// into equal bins, and each bin contributes the point nearest its midpoint.
pub fn spread(points: &[FrcPoint], eligible: &[usize], count: usize) -> Vec<usize> {
    let mut segments: Vec<Vec<usize>> = Vec::new();
    for &i in eligible {
        match segments.last_mut() {
            Some(seg) if *seg.last().unwrap() + 1 == i => seg.push(i),
            _ => segments.push(vec![i]),
        }
    }
    let extent = |seg: &[usize]| {
        let (lo, hi) = seg.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(points[i].omega), hi.max(points[i].omega))
        });
        (lo, hi)
    };
    let total: f64 = segments.iter().map(|s| extent(s).1 - extent(s).0).sum();
    if count == 0 || total <= 0.0 {
        return eligible.iter().take(count).copied().collect();
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut target = (k as f64 + 0.5) * total / count as f64;
        for seg in &segments {
            let (lo, hi) = extent(seg);
            if target <= hi - lo || std::ptr::eq(seg, segments.last().unwrap()) {
                let om = lo + target.min(hi - lo);
                let best = seg
                    .iter()
                    .copied()
                    .min_by(|&a, &b| (points[a].omega - om).abs().total_cmp(&(points[b].omega - om).abs()))
                    .unwrap();
                out.push(best);
                break;
            }
            target -= hi - lo;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationRecord {
    pub omega: f64,
    pub ssm_amplitudes: Vec<f64>,
    pub oracle_amplitudes: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub ssm_stable: bool,
    pub oracle_stable: Option<bool>,
    /// Largest Floquet multiplier modulus.
    pub max_multiplier: Option<f64>,
    pub error: Option<String>,
}

impl ValidationRecord {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().copied().fold(if self.error.is_some() { f64::INFINITY } else { 0.0 }, f64::max)
    }

    /// Stability agreement; vacuous when the oracle reports no multipliers.
    pub fn stability_agrees(&self) -> bool {
        self.oracle_stable.is_none_or(|s| s == self.ssm_stable)
    }
}

/// Solves the full-system orbit at each FRC point, seeded from its
/// reconstructed SSM orbit, in parallel.
pub fn validate_points(
    model: &MechanicalModel,
    points: &[&FrcPoint],
    dofs: &[usize],
    solver: &dyn OrbitSolver,
) -> Vec<ValidationRecord> {
    points
        .par_iter()
        .map(|p| {
            let mut rec = ValidationRecord {
                omega: p.omega,
                ssm_amplitudes: p.amplitudes.clone(),
                oracle_amplitudes: Vec::new(),
                relative_errors: Vec::new(),
                ssm_stable: p.stability.is_stable(),
                oracle_stable: None,
                max_multiplier: None,
                error: None,
            };
            let Some(seed) = p.orbit.as_ref() else {
                rec.error = Some("no reconstructed orbit to seed from".into());
                return rec;
            };
            let req = OrbitRequest::new(p.omega, p.epsilon).with_period(seed.period);
            match solver.solve(model, &req, &OrbitGuess { states: seed.states.clone() }) {
                Ok(orbit) => {
                    rec.oracle_amplitudes = dofs.iter().map(|&d| orbit.amplitude(d)).collect();
                    rec.relative_errors = rec
                        .ssm_amplitudes
                        .iter()
                        .zip(&rec.oracle_amplitudes)
                        .map(|(s, o)| (s - o).abs() / o.abs().max(f64::MIN_POSITIVE))
                        .collect();
                    rec.oracle_stable = orbit.stable();
                    rec.max_multiplier =
                        (!orbit.multipliers.is_empty()).then(|| orbit.multipliers.iter().map(|m| m.norm()).fold(0.0, f64::max));
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect()
}
