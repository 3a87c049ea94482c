//! Equilibria of the slow-phase dynamics: seeding, pseudo-arclength
//! continuation, stability and bifurcation detection.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SsmError};
use crate::ode::{dp45_observe, Dp45Options};
use crate::poly::C64;
use crate::reduced::{coordinates_for, Parameter, ReducedVectorField, Representation, SlowCoordinates, SlowState};
use crate::registry::{Named, Registry};

/// Real parts below this are treated as zero when classifying stability.
pub const HYPERBOLICITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    NonHyperbolic,
}

impl Stability {
    pub fn from_eigenvalues(eigs: &[C64]) -> Self {
        if eigs.iter().any(|z| z.re.abs() <= HYPERBOLICITY_TOL) {
            Stability::NonHyperbolic
        } else if eigs.iter().all(|z| z.re < 0.0) {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    pub fn is_stable(self) -> bool {
        self == Stability::Stable
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bifurcation {
    None,
    SaddleNode,
    Hopf,
    BranchEnd,
}

impl Bifurcation {
    pub fn label(self) -> &'static str {
        match self {
            Bifurcation::None => "none",
            Bifurcation::SaddleNode => "SN",
            Bifurcation::Hopf => "HB",
            Bifurcation::BranchEnd => "end",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    RangeExhausted,
    Singularity { index: usize, rho: f64, omega: f64 },
    StepFailure { message: String },
    MaxSteps,
    /// The branch returned to its first point.
    ClosedLoop,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::RangeExhausted => f.write_str("range-exhausted"),
            Termination::Singularity { .. } => f.write_str("singularity"),
            Termination::StepFailure { .. } => f.write_str("step-failure"),
            Termination::MaxSteps => f.write_str("max-steps"),
            Termination::ClosedLoop => f.write_str("closed-loop"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumPoint {
    pub state: SlowState,
    pub omega: f64,
    pub epsilon: f64,
    pub eigenvalues: Vec<C64>,
    pub stability: Stability,
    pub bifurcation: Bifurcation,
    pub residual_norm: f64,
    pub arclength: f64,
}

impl EquilibriumPoint {
    fn evaluate(
        chart: &dyn SlowCoordinates,
        rvf: &ReducedVectorField,
        x: DVector<f64>,
        arclength: f64,
    ) -> Result<Self> {
        let res = chart.field(rvf, &x)?.norm();
        let jac = chart.jacobian(rvf, &x)?;
        let eigenvalues: Vec<C64> = jac.complex_eigenvalues().iter().copied().collect();
        Ok(EquilibriumPoint {
            state: SlowState::new(chart.representation(), x),
            omega: rvf.omega,
            epsilon: rvf.epsilon,
            stability: Stability::from_eigenvalues(&eigenvalues),
            eigenvalues,
            bifurcation: Bifurcation::None,
            residual_norm: res,
            arclength,
        })
    }

    pub fn parameter(&self, par: Parameter) -> f64 {
        match par {
            Parameter::Omega => self.omega,
            Parameter::Epsilon => self.epsilon,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub points: Vec<EquilibriumPoint>,
    pub parameter: Parameter,
    pub representation: Representation,
    pub termination: Termination,
}

impl Branch {
    pub fn count(&self, kind: Bifurcation) -> usize {
        self.points.iter().filter(|p| p.bifurcation == kind).count()
    }
}

/// Residual bound relative to the state size.
pub fn residual_scale(x: &DVector<f64>) -> f64 {
    1.0 + x.norm()
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 60 }
    }
}

/// Damped Newton at fixed parameters.
pub fn newton_equilibrium(
    chart: &dyn SlowCoordinates,
    rvf: &ReducedVectorField,
    guess: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<DVector<f64>> {
    let mut x = guess.clone();
    chart.normalize(&mut x);
    let mut fx = chart.field(rvf, &x)?;
    for _ in 0..opts.max_iter {
        if fx.norm() <= opts.tol * residual_scale(&x) {
            return Ok(x);
        }
        let jac = chart.jacobian(rvf, &x)?;
        let dx = jac
            .lu()
            .solve(&(-&fx))
            .ok_or_else(|| SsmError::NewtonDivergence("singular Jacobian".into()))?;
        let mut alpha = 1.0;
        loop {
            let mut trial = &x + &dx * alpha;
            chart.normalize(&mut trial);
            match chart.field(rvf, &trial) {
                Ok(ft) if ft.norm() < fx.norm() || alpha < 1e-3 => {
                    if ft.iter().all(|v| v.is_finite()) {
                        x = trial;
                        fx = ft;
                        break;
                    }
                }
                Ok(_) => {}
                Err(e @ SsmError::PolarSingularity { .. }) if alpha < 1e-3 => return Err(e),
                Err(SsmError::PolarSingularity { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
    }
    if fx.norm() <= opts.tol * residual_scale(&x) {
        return Ok(x);
    }
    Err(SsmError::NewtonDivergence(format!(
        "residual {:.3e} after {} iterations",
        fx.norm(),
        opts.max_iter
    )))
}

/// A strategy for locating an equilibrium at fixed `(Omega, epsilon)`.
pub trait EquilibriumSeeder: Named + Send + Sync {
    fn find(
        &self,
        chart: &dyn SlowCoordinates,
        rvf: &ReducedVectorField,
        guess: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>>;
}

pub struct RootFind;
pub struct ForwardSimulate;

impl Named for RootFind {
    fn name(&self) -> &'static str {
        "root-find"
    }
    fn description(&self) -> &'static str {
        "damped Newton from a guess"
    }
}

impl Named for ForwardSimulate {
    fn name(&self) -> &'static str {
        "forward-simulate"
    }
    fn description(&self) -> &'static str {
        "integrate the slow dynamics to an attractor, then polish with Newton"
    }
}

impl EquilibriumSeeder for RootFind {
    fn find(
        &self,
        chart: &dyn SlowCoordinates,
        rvf: &ReducedVectorField,
        guess: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        let g = guess.cloned().unwrap_or_else(|| chart.default_guess(rvf.m()));
        newton_equilibrium(chart, rvf, &g, &NewtonOptions::default())
    }
}

impl EquilibriumSeeder for ForwardSimulate {
    fn find(
        &self,
        chart: &dyn SlowCoordinates,
        rvf: &ReducedVectorField,
        guess: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        let x0 = guess.cloned().unwrap_or_else(|| chart.default_guess(rvf.m()));
        let decay = rvf.lambdas.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        let t_max = 200.0 / decay.max(1e-12);
        let mut err = None;
        let mut converged = false;
        let opts = Dp45Options { rtol: 1e-10, atol: 1e-14, max_steps: 5_000_000, ..Default::default() };
        let (_, x) = dp45_observe(
            |_, x| match chart.field(rvf, x) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    DVector::from_element(x.len(), f64::NAN)
                }
            },
            0.0,
            &x0,
            t_max,
            &opts,
            |_, x| match chart.field(rvf, x) {
                Ok(v) if v.norm() <= 1e-8 * residual_scale(x) => {
                    converged = true;
                    ControlFlow::Break(())
                }
                _ => ControlFlow::Continue(()),
            },
        )
        .map_err(|e| err.take().unwrap_or(e))?;
        if let Some(e) = err {
            return Err(e);
        }
        if !converged {
            return Err(SsmError::NoEquilibriumAttractor);
        }
        newton_equilibrium(chart, rvf, &x, &NewtonOptions::default())
    }
}

pub fn seeder_registry() -> Registry<dyn EquilibriumSeeder> {
    let mut r: Registry<dyn EquilibriumSeeder> = Registry::new("seed strategy");
    r.register(Arc::new(RootFind)).register(Arc::new(ForwardSimulate));
    r
}

/// Seeds an equilibrium with the named strategy. Seeding runs in Cartesian
/// coordinates, which are regular at `rho = 0`; the result is then polished
/// in `repr`.
pub fn find_initial_equilibrium(
    rvf: &ReducedVectorField,
    repr: Representation,
    strategy: &str,
    guess: Option<&SlowState>,
) -> Result<EquilibriumPoint> {
    let seeder = seeder_registry().get(strategy)?;
    let cart = coordinates_for(Representation::Cartesian);
    let g = guess.map(|s| s.convert(Representation::Cartesian).values);
    let x = seeder.find(cart.as_ref(), rvf, g.as_ref())?;
    if repr == Representation::Cartesian {
        return EquilibriumPoint::evaluate(cart.as_ref(), rvf, x, 0.0);
    }
    polish_equilibrium(rvf, repr, &SlowState::new(Representation::Cartesian, x), &NewtonOptions::default())
}

/// Newton-polishes `guess` at the field's parameters and classifies the result.
pub fn polish_equilibrium(
    rvf: &ReducedVectorField,
    repr: Representation,
    guess: &SlowState,
    opts: &NewtonOptions,
) -> Result<EquilibriumPoint> {
    let chart = coordinates_for(repr);
    let x = newton_equilibrium(chart.as_ref(), rvf, &guess.convert(repr).values, opts)?;
    EquilibriumPoint::evaluate(chart.as_ref(), rvf, x, 0.0)
}

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    pub parameter: Parameter,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub newton_tol: f64,
    pub max_corrector: usize,
    pub bisect_tol: f64,
    /// `+1` continues towards increasing parameter at the seed.
    pub direction: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            parameter: Parameter::Omega,
            h_init: 1e-3,
            h_min: 1e-5,
            h_max: 0.05,
            max_steps: 20_000,
            newton_tol: 1e-10,
            max_corrector: 8,
            bisect_tol: 1e-8,
            direction: 1.0,
        }
    }
}

/// Extended-system evaluation at `y = (x, mu)`.
struct Extended<'a> {
    chart: &'a dyn SlowCoordinates,
    rvf: ReducedVectorField,
    par: Parameter,
}

impl Extended<'_> {
    fn dim(&self) -> usize {
        2 * self.rvf.m()
    }

    fn split(&mut self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        self.rvf.set_parameter(self.par, y[n]);
        y.rows(0, n).into_owned()
    }

    fn field(&mut self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.split(y);
        self.chart.field(&self.rvf, &x)
    }

    /// `[F_x, F_mu]`.
    fn jacobian(&mut self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let x = self.split(y);
        let n = x.len();
        let jx = self.chart.jacobian(&self.rvf, &x)?;
        let jp = self.chart.parameter_derivative(&self.rvf, &x, self.par)?;
        let mut j = DMatrix::zeros(n, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&jx);
        j.column_mut(n).copy_from(&jp);
        Ok(j)
    }

    /// Unit tangent oriented along `reference`.
    fn tangent(&mut self, y: &DVector<f64>, reference: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let j = self.jacobian(y)?;
        let mut big = DMatrix::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n + 1)).copy_from(&j);
        big.row_mut(n).copy_from(&reference.transpose());
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let t = big
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SsmError::NewtonDivergence("singular tangent system".into()))?;
        let t = t.normalize();
        if t.iter().any(|v| !v.is_finite()) {
            return Err(SsmError::NewtonDivergence("non-finite tangent".into()));
        }
        Ok(t)
    }

    /// Solves `F(y) = 0`, `t . (y - anchor) = s` from `y0`; returns the
    /// solution and the iteration count.
    fn correct(
        &mut self,
        y0: &DVector<f64>,
        anchor: &DVector<f64>,
        t: &DVector<f64>,
        s: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<(DVector<f64>, usize)> {
        let n = self.dim();
        let mut y = y0.clone();
        let mut prev = f64::INFINITY;
        for it in 0..=max_iter {
            let f = self.field(&y)?;
            let g = t.dot(&(&y - anchor)) - s;
            let x = y.rows(0, n).into_owned();
            let fnorm = f.norm();
            if fnorm <= tol * residual_scale(&x) && g.abs() <= 1e-12 * (1.0 + s.abs()) {
                return Ok((y, it));
            }
            if it == max_iter || !fnorm.is_finite() || (it > 1 && fnorm > 2.0 * prev) {
                break;
            }
            prev = fnorm;
            let j = self.jacobian(&y)?;
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n + 1)).copy_from(&j);
            big.row_mut(n).copy_from(&t.transpose());
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-f));
            rhs[n] = -g;
            let dy = big
                .lu()
                .solve(&rhs)
                .ok_or_else(|| SsmError::NewtonDivergence("singular corrector system".into()))?;
            y += dy;
            let mut xs = y.rows(0, n).into_owned();
            self.chart.unwrap_near(&mut xs, &anchor.rows(0, n).into_owned());
            y.rows_mut(0, n).copy_from(&xs);
        }
        Err(SsmError::NewtonDivergence("corrector did not converge".into()))
    }

    fn state_jacobian(&mut self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let x = self.split(y);
        self.chart.jacobian(&self.rvf, &x)
    }

    fn point(&mut self, y: &DVector<f64>, arclength: f64) -> Result<EquilibriumPoint> {
        let mut x = self.split(y);
        self.chart.normalize(&mut x);
        EquilibriumPoint::evaluate(self.chart, &self.rvf, x, arclength)
    }
}

fn saddle_node_test(jac: &DMatrix<f64>) -> f64 {
    jac.determinant()
}

/// Product of pairwise eigenvalue sums; real, vanishing at Hopf points.
fn hopf_test(eigs: &[C64]) -> f64 {
    let mut p = C64::new(1.0, 0.0);
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            p *= eigs[i] + eigs[j];
        }
    }
    p.re
}

fn has_hopf_pair(eigs: &[C64]) -> bool {
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    eigs.iter().any(|z| z.im.abs() > 1e-8 * scale && z.re.abs() <= 1e-6 * scale)
}

fn sign_change(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
}

/// Locates a zero of `test` along the arc from `anchor` by bisection in arclength.
#[allow(clippy::too_many_arguments)]
fn bisect<T>(
    ext: &mut Extended<'_>,
    anchor: &DVector<f64>,
    t: &DVector<f64>,
    h: f64,
    arclength: f64,
    opts: &ContinuationOptions,
    test: T,
) -> Result<EquilibriumPoint>
where
    T: Fn(&DMatrix<f64>, &[C64]) -> f64,
{
    let eval = |ext: &mut Extended<'_>, y: &DVector<f64>| -> Result<f64> {
        let j = ext.state_jacobian(y)?;
        let eigs: Vec<C64> = j.complex_eigenvalues().iter().copied().collect();
        Ok(test(&j, &eigs))
    };
    let mut lo = 0.0;
    let mut hi = h;
    let mut ylo = anchor.clone();
    let f_lo = eval(ext, &ylo)?;
    let mut y_mid = anchor.clone();
    while hi - lo > opts.bisect_tol {
        let s = 0.5 * (lo + hi);
        let pred = &ylo + t * (s - lo);
        let (y, _) = ext.correct(&pred, anchor, t, s, opts.newton_tol, 20)?;
        let fm = eval(ext, &y)?;
        if sign_change(f_lo, fm) {
            hi = s;
        } else {
            lo = s;
            ylo = y.clone();
        }
        y_mid = y;
    }
    ext.point(&y_mid, arclength + 0.5 * (lo + hi))
}

/// Pseudo-arclength continuation of `seed` over `range` of the parameter.
pub fn continue_branch(
    rvf: &ReducedVectorField,
    repr: Representation,
    range: (f64, f64),
    seed: &EquilibriumPoint,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let chart = coordinates_for(repr);
    let par = opts.parameter;
    let mut ext = Extended { chart: chart.as_ref(), rvf: rvf.clone(), par };
    let n = ext.dim();
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let mut y = DVector::zeros(n + 1);
    y.rows_mut(0, n).copy_from(&seed.state.convert(repr).values);
    y[n] = seed.parameter(par);
    let seed_res = ext.field(&y)?.norm();
    if seed_res > 1e-8 * residual_scale(&y.rows(0, n).into_owned()) {
        return Err(SsmError::NewtonDivergence(format!("seed residual {seed_res:.3e} exceeds 1e-8")));
    }
    let mut reference = DVector::zeros(n + 1);
    reference[n] = opts.direction.signum();
    let mut t = ext.tangent(&y, &reference)?;
    let mut points = vec![ext.point(&y, 0.0)?];
    let mut h = opts.h_init.min(opts.h_max);
    let mut arclength = 0.0;
    let mut prev_sn = saddle_node_test(&ext.state_jacobian(&y)?);
    let mut prev_hopf = hopf_test(&points[0].eigenvalues);
    let start = y.clone();
    let termination = 'outer: loop {
        if points.len() >= opts.max_steps {
            break Termination::MaxSteps;
        }
        let pred = &y + &t * h;
        let step = ext.correct(&pred, &y, &t, h, opts.newton_tol, opts.max_corrector);
        let (ynew, iters) = match step {
            Ok(v) => v,
            Err(e) => {
                debug!(target: "continuation", "step h = {h:.3e} rejected: {e}");
                h *= 0.5;
                if h < opts.h_min {
                    break match e {
                        SsmError::PolarSingularity { index, rho } => {
                            Termination::Singularity { index, rho, omega: ext.rvf.omega }
                        }
                        e => Termination::StepFailure { message: e.to_string() },
                    };
                }
                continue;
            }
        };
        let tnew = match ext.tangent(&ynew, &t) {
            Ok(v) => v,
            Err(e) => {
                h *= 0.5;
                if h < opts.h_min {
                    break Termination::StepFailure { message: e.to_string() };
                }
                continue;
            }
        };
        if tnew.dot(&t) < 0.5 && h > opts.h_min {
            h *= 0.5;
            continue;
        }
        let mut point = ext.point(&ynew, arclength + h)?;
        let jac_new = ext.state_jacobian(&ynew)?;
        let sn = saddle_node_test(&jac_new);
        let hopf = hopf_test(&point.eigenvalues);
        if sign_change(prev_sn, sn) {
            let mut b = bisect(&mut ext, &y, &t, h, arclength, opts, |j, _| saddle_node_test(j))?;
            b.bifurcation = Bifurcation::SaddleNode;
            info!(target: "continuation", "saddle-node near {:?} = {:.8}", par, b.parameter(par));
            points.push(b);
        }
        if sign_change(prev_hopf, hopf) {
            let b = bisect(&mut ext, &y, &t, h, arclength, opts, |_, e| hopf_test(e));
            if let Ok(mut b) = b {
                if has_hopf_pair(&b.eigenvalues) {
                    b.bifurcation = Bifurcation::Hopf;
                    info!(target: "continuation", "Hopf point near {:?} = {:.8}", par, b.parameter(par));
                    points.push(b);
                }
            }
        }
        points.sort_by(|a, b| a.arclength.total_cmp(&b.arclength));
        prev_sn = sn;
        prev_hopf = hopf;
        arclength += h;
        let mu = ynew[n];
        if mu < lo || mu > hi {
            let bound = if mu < lo { lo } else { hi };
            let frac = (bound - y[n]) / (mu - y[n]);
            let guess = &y + (&ynew - &y) * frac;
            let mut rv = ext.rvf.clone();
            rv.set_parameter(par, bound);
            let x0 = guess.rows(0, n).into_owned();
            if let Ok(x) = newton_equilibrium(ext.chart, &rv, &x0, &NewtonOptions::default()) {
                let mut p = EquilibriumPoint::evaluate(ext.chart, &rv, x, arclength - h * (1.0 - frac))?;
                p.bifurcation = Bifurcation::BranchEnd;
                points.push(p);
            }
            break Termination::RangeExhausted;
        }
        point.arclength = arclength;
        points.push(point);
        let from_start = |v: &DVector<f64>| {
            let mut x = v.rows(0, n).into_owned();
            ext.chart.unwrap_near(&mut x, &start.rows(0, n).into_owned());
            let mut d = v - &start;
            d.rows_mut(0, n).copy_from(&(x - start.rows(0, n)));
            d
        };
        let (dnew, dold) = (from_start(&ynew), from_start(&y));
        if arclength > 10.0 * opts.h_min.max(h) && dnew.norm() < h.max(opts.h_min) {
            let crossed = dnew.dot(&t) * dold.dot(&t) <= 0.0;
            if crossed {
                break 'outer Termination::ClosedLoop;
            }
        }
        y = ynew;
        t = tnew;
        if iters <= 3 {
            h = (h * 1.2).min(opts.h_max);
        }
    };
    if let Some(last) = points.last_mut() {
        if last.bifurcation == Bifurcation::None && termination != Termination::RangeExhausted {
            last.bifurcation = Bifurcation::BranchEnd;
        }
    }
    info!(
        target: "continuation",
        "branch of {} points terminated: {termination}",
        points.len()
    );
    Ok(Branch { points, parameter: par, representation: repr, termination })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduced::{ResonantTerm, RHO_MIN};
    use crate::spectral::Rational;

    fn linear(eps: f64, omega: f64) -> ReducedVectorField {
        ReducedVectorField {
            lambdas: vec![C64::new(-0.01, 1.0)],
            r_exact: vec![Rational::from_integer(1)],
            r: vec![1.0],
            terms: vec![vec![]],
            forcing: vec![C64::new(0.5, 0.0)],
            forcing_omega_power: 0,
            epsilon: eps,
            omega,
            rho_min: RHO_MIN,
        }
    }

    #[test]
    fn origin_when_unforced() {
        let rvf = linear(0.0, 1.0);
        let p = find_initial_equilibrium(&rvf, Representation::Cartesian, "root-find", None).unwrap();
        assert_eq!(p.state.values.amax(), 0.0);
        assert_eq!(p.stability, Stability::Stable);
    }

    #[test]
    fn linear_branch_matches_closed_form() {
        let rvf = linear(0.01, 0.95);
        let seed = find_initial_equilibrium(&rvf, Representation::Cartesian, "root-find", None).unwrap();
        let branch = continue_branch(
            &rvf,
            Representation::Cartesian,
            (0.95, 1.05),
            &seed,
            &ContinuationOptions::default(),
        )
        .unwrap();
        assert_eq!(branch.termination, Termination::RangeExhausted);
        assert_eq!(branch.count(Bifurcation::SaddleNode), 0);
        assert_eq!(branch.count(Bifurcation::Hopf), 0);
        for p in &branch.points {
            let amp = 0.01 * 0.5 / (0.01f64.powi(2) + (1.0 - p.omega).powi(2)).sqrt();
            // residual 1e-10 over the smallest singular value 1e-2
            assert!((p.state.rho()[0] - amp).abs() <= 2e-8);
            assert!(p.stability.is_stable());
        }
        assert!((branch.points.last().unwrap().omega - 1.05).abs() < 1e-12);
    }

    #[test]
    fn duffing_branch_has_two_folds() {
        let mut rvf = linear(0.01, 0.95);
        rvf.terms[0].push(ResonantTerm { l: vec![2], j: vec![1], gamma: C64::new(0.0, 0.5) });
        let seed = find_initial_equilibrium(&rvf, Representation::Cartesian, "root-find", None).unwrap();
        let branch = continue_branch(
            &rvf,
            Representation::Cartesian,
            (0.95, 1.2),
            &seed,
            &ContinuationOptions::default(),
        )
        .unwrap();
        assert_eq!(branch.count(Bifurcation::SaddleNode), 2);
        for p in branch.points.iter().filter(|p| p.bifurcation == Bifurcation::SaddleNode) {
            let min_re = p.eigenvalues.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
            assert!(min_re < 1e-6, "fold eigenvalue {min_re:e}");
        }
    }

    #[test]
    fn seeders_agree_on_linear_field() {
        let rvf = linear(0.01, 0.99);
        let a = find_initial_equilibrium(&rvf, Representation::Cartesian, "root-find", None).unwrap();
        let b = find_initial_equilibrium(&rvf, Representation::Cartesian, "forward-simulate", None).unwrap();
        assert!((&a.state.values - &b.state.values).amax() < 1e-8);
    }

    #[test]
    fn unknown_seeder() {
        let rvf = linear(0.01, 0.99);
        assert!(find_initial_equilibrium(&rvf, Representation::Cartesian, "guess", None).is_err());
    }
}
