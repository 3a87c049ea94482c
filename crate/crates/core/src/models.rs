//! Builtin example models: an oscillator chain and two Galerkin beams.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::error::{Result, SsmError};
use crate::model::MechanicalModel;
use crate::poly::{MultiIndex, PolynomialMap, Term, C64};
use crate::registry::{Named, Registry};

/// Builds a model from a JSON object of parameter overrides.
pub trait ModelGenerator: Named + Send + Sync {
    /// Parameter names with their default values.
    fn defaults(&self) -> Value;

    fn generate(&self, params: &Value) -> Result<MechanicalModel>;
}

pub fn model_registry() -> Registry<dyn ModelGenerator> {
    let mut r: Registry<dyn ModelGenerator> = Registry::new("model generator");
    r.register(Arc::new(ChainGenerator))
        .register(Arc::new(HingedClampedBeamGenerator))
        .register(Arc::new(MovingBeamGenerator));
    r
}

fn param_f64(params: &Value, defaults: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .or_else(|| defaults.get(key))
        .and_then(Value::as_f64)
        .ok_or_else(|| SsmError::InvalidParameter(format!("parameter '{key}' must be a number")))
}

fn param_vec(params: &Value, defaults: &Value, key: &str) -> Result<Vec<f64>> {
    let v = params.get(key).or_else(|| defaults.get(key));
    match v {
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                x.as_f64().ok_or_else(|| {
                    SsmError::InvalidParameter(format!("parameter '{key}' must be a list of numbers"))
                })
            })
            .collect(),
        Some(Value::Number(x)) => Ok(vec![x.as_f64().unwrap()]),
        _ => Err(SsmError::InvalidParameter(format!("parameter '{key}' must be a list"))),
    }
}

fn check_known(params: &Value, defaults: &Value) -> Result<()> {
    if let Some(obj) = params.as_object() {
        for k in obj.keys() {
            if defaults.get(k).is_none() {
                return Err(SsmError::InvalidParameter(format!("unknown model parameter '{k}'")));
            }
        }
    }
    Ok(())
}

fn obj(pairs: &[(&str, Value)]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v.clone());
    }
    Value::Object(m)
}

pub struct ChainGenerator;

impl Named for ChainGenerator {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn description(&self) -> &'static str {
        "three unit oscillators coupled by cubic springs"
    }
}

impl ModelGenerator for ChainGenerator {
    fn defaults(&self) -> Value {
        obj(&[
            ("c1", 5e-4.into()),
            ("c2", 1e-3.into()),
            ("c3", 1.5e-3.into()),
            ("K", 1e-3.into()),
            ("f1", 1.0.into()),
        ])
    }

    fn generate(&self, params: &Value) -> Result<MechanicalModel> {
        let d = self.defaults();
        check_known(params, &d)?;
        let g = |k| param_f64(params, &d, k);
        chain_model(g("c1")?, g("c2")?, g("c3")?, g("K")?, g("f1")?)
    }
}

/// Pushes `coeff * (x_a - x_b)^3` into `row`.
fn push_cubic_difference(terms: &mut Vec<Term>, row: usize, a: usize, b: usize, coeff: f64) {
    let binom = [1.0, -3.0, 3.0, -1.0];
    for (p, &c) in binom.iter().enumerate() {
        let mono = MultiIndex::from_pairs([(a, 3 - p as u32), (b, p as u32)]);
        terms.push(Term { row, monomial: mono, coeff: C64::new(coeff * c, 0.0) });
    }
}

pub fn chain_model(c1: f64, c2: f64, c3: f64, k: f64, f1: f64) -> Result<MechanicalModel> {
    if !(c1 > 0.0 && c2 > 0.0 && c3 > 0.0) || k < 0.0 {
        return Err(SsmError::InvalidParameter(
            "chain needs positive damping and non-negative coupling".into(),
        ));
    }
    let mut terms = Vec::new();
    if k != 0.0 {
        push_cubic_difference(&mut terms, 0, 0, 1, k);
        push_cubic_difference(&mut terms, 1, 1, 0, k);
        push_cubic_difference(&mut terms, 1, 1, 2, k);
        push_cubic_difference(&mut terms, 2, 2, 1, k);
    }
    let nl = PolynomialMap::from_terms(6, 3, terms)?;
    let model = MechanicalModel::new(
        DMatrix::identity(3, 3),
        DMatrix::from_diagonal(&DVector::from_vec(vec![c1, c2, c3])),
        DMatrix::identity(3, 3),
        nl,
        DVector::from_vec(vec![f1 / 2.0, 0.0, 0.0]),
    )?;
    Ok(model.with_name("chain"))
}

pub struct HingedClampedBeamGenerator;

impl Named for HingedClampedBeamGenerator {
    fn name(&self) -> &'static str {
        "hc-beam"
    }

    fn description(&self) -> &'static str {
        "hinged-clamped beam with axial stretching, modal Galerkin form"
    }
}

impl ModelGenerator for HingedClampedBeamGenerator {
    fn defaults(&self) -> Value {
        obj(&[
            ("l", 2.0.into()),
            ("n", 10.into()),
            ("c", 100.0.into()),
            ("eps", 1e-4.into()),
            ("f", Value::Array(vec![5e4.into()])),
        ])
    }

    fn generate(&self, params: &Value) -> Result<MechanicalModel> {
        let d = self.defaults();
        check_known(params, &d)?;
        let n = param_f64(params, &d, "n")?;
        if n.fract() != 0.0 || n < 2.0 {
            return Err(SsmError::InvalidParameter("beam needs an integer n >= 2".into()));
        }
        let mut f = param_vec(params, &d, "f")?;
        f.resize(n as usize, 0.0);
        hinged_clamped_beam_model(
            param_f64(params, &d, "l")?,
            n as usize,
            param_f64(params, &d, "c")?,
            param_f64(params, &d, "eps")?,
            &f,
        )
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if order == 0 { 1.0 } else { p1 };
            let pm = if order == 1 { 1.0 } else { p0 };
            dp = order as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[order - 1 - i] = w[i];
    }
    (x, w)
}

/// Positive roots `x_k` of `sin x - cos x tanh x`, one in each `(k pi, k pi + pi/2)`.
pub fn hinged_clamped_roots(count: usize) -> Result<Vec<f64>> {
    let g = |x: f64| x.sin() - x.cos() * x.tanh();
    let dg = |x: f64| {
        let t = x.tanh();
        x.cos() + x.sin() * t - x.cos() * (1.0 - t * t)
    };
    let mut roots = Vec::with_capacity(count);
    for k in 1..=count {
        let (mut lo, mut hi) = (k as f64 * PI + 1e-9, k as f64 * PI + PI / 2.0 - 1e-9);
        if g(lo) * g(hi) > 0.0 {
            return Err(SsmError::RootFinding(format!("no sign change in bracket {k}")));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..5 {
            let step = g(x) / dg(x);
            x -= step;
            if step.abs() < 1e-15 * x {
                break;
            }
        }
        if !(x > k as f64 * PI && x < k as f64 * PI + PI / 2.0) || g(x).abs() > 1e-12 {
            return Err(SsmError::RootFinding(format!("Newton left bracket {k}")));
        }
        roots.push(x);
    }
    Ok(roots)
}

/// Hinged-clamped eigenfunction `sin(bx) - (sin(bl)/sinh(bl)) sinh(bx)` and
/// its first two derivatives, with hyperbolic ratios evaluated stably.
#[derive(Clone, Copy, Debug)]
pub struct BeamMode {
    pub beta: f64,
    pub len: f64,
    pub scale: f64,
}

impl BeamMode {
    fn ratios(&self, x: f64) -> (f64, f64) {
        let b = self.beta;
        let den = 1.0 - (-2.0 * b * self.len).exp();
        let e = (b * (x - self.len)).exp();
        let m = (-2.0 * b * x).exp();
        (e * (1.0 - m) / den, e * (1.0 + m) / den)
    }

    /// `(psi, psi', psi'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let b = self.beta;
        let s = (b * self.len).sin();
        let (sh, ch) = self.ratios(x);
        let psi = (b * x).sin() - s * sh;
        let d1 = b * ((b * x).cos() - s * ch);
        let d2 = -b * b * ((b * x).sin() + s * sh);
        (self.scale * psi, self.scale * d1, self.scale * d2)
    }

    pub fn omega(&self) -> f64 {
        self.beta * self.beta
    }
}

/// Quadrature panels on `[0, l]` with 16-point Gauss-Legendre rules.
fn beam_quadrature(l: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(16);
    let h = l / panels as f64;
    let mut xs = Vec::with_capacity(16 * panels);
    let mut ws = Vec::with_capacity(16 * panels);
    for p in 0..panels {
        let a = p as f64 * h;
        for (&x, &w) in gx.iter().zip(&gw) {
            xs.push(a + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Unit-L2 modes and the matrices `a_is = int psi_i psi_s''`,
/// `b_jk = int psi_j' psi_k'`.
pub struct BeamIntegrals {
    pub modes: Vec<BeamMode>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub panels: usize,
}

pub fn beam_integrals(l: f64, n: usize, panels: usize) -> Result<BeamIntegrals> {
    let roots = hinged_clamped_roots(n)?;
    let (xs, ws) = beam_quadrature(l, panels);
    let mut modes: Vec<BeamMode> = Vec::with_capacity(n);
    for x in roots {
        let mut m = BeamMode { beta: x / l, len: l, scale: 1.0 };
        let norm2: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * m.eval(x).0.powi(2)).sum();
        m.scale = 1.0 / norm2.sqrt();
        modes.push(m);
    }
    let vals: Vec<Vec<(f64, f64, f64)>> =
        modes.iter().map(|m| xs.iter().map(|&x| m.eval(x)).collect()).collect();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for s in 0..n {
            let mut sa = 0.0;
            let mut sb = 0.0;
            for q in 0..ws.len() {
                sa += ws[q] * vals[i][q].0 * vals[s][q].2;
                sb += ws[q] * vals[i][q].1 * vals[s][q].1;
            }
            a[(i, s)] = sa;
            if s >= i {
                b[(i, s)] = sb;
                b[(s, i)] = sb;
            }
        }
    }
    Ok(BeamIntegrals { modes, a, b, panels })
}

/// Integrals with panel doubling until every entry of `b` changes by at most
/// `1e-10` relative to the largest entry.
pub fn converged_beam_integrals(l: f64, n: usize) -> Result<BeamIntegrals> {
    let mut panels = 8;
    let mut prev = beam_integrals(l, n, panels)?;
    while panels <= 1024 {
        panels *= 2;
        let next = beam_integrals(l, n, panels)?;
        let scale = next.b.amax().max(next.a.amax());
        let change = (&next.b - &prev.b).amax().max((&next.a - &prev.a).amax());
        if change <= 1e-10 * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(SsmError::Quadrature(format!("beam integrals for n = {n} did not settle")))
}

/// `u_i'' + omega_i^2 u_i = eps(-2c u_i' + f_i cos(Omega t) + (1/2l) sum alpha u_j u_k u_s)`
/// in the model convention: damping and cubic tensor carry the factor
/// `eps`, forcing enters as `f^a = f/2` and is scaled by the run epsilon.
pub fn hinged_clamped_beam_model(
    l: f64,
    n: usize,
    c: f64,
    eps: f64,
    f: &[f64],
) -> Result<MechanicalModel> {
    if !(l > 0.0) || n < 2 || f.len() != n {
        return Err(SsmError::InvalidParameter(
            "beam needs l > 0, n >= 2 and one load value per mode".into(),
        ));
    }
    let ints = converged_beam_integrals(l, n)?;
    let omega2: Vec<f64> = ints.modes.iter().map(|m| m.omega().powi(2)).collect();
    let mut terms = Vec::with_capacity(n * n * n * n);
    let pref = -eps / (2.0 * l);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..n {
                    let alpha = ints.a[(i, s)] * ints.b[(j, k)];
                    if alpha != 0.0 {
                        terms.push(Term {
                            row: i,
                            monomial: MultiIndex::from_factors(&[j, k, s]),
                            coeff: C64::new(pref * alpha, 0.0),
                        });
                    }
                }
            }
        }
    }
    let nl = PolynomialMap::from_terms(2 * n, n, terms)?;
    let model = MechanicalModel::new(
        DMatrix::identity(n, n),
        DMatrix::identity(n, n) * (2.0 * c * eps),
        DMatrix::from_diagonal(&DVector::from_vec(omega2)),
        nl,
        DVector::from_iterator(n, f.iter().map(|x| x / 2.0)),
    )?;
    Ok(model.with_name("hc-beam"))
}

pub struct MovingBeamGenerator;

impl Named for MovingBeamGenerator {
    fn name(&self) -> &'static str {
        "moving-beam"
    }

    fn description(&self) -> &'static str {
        "axially moving viscoelastic beam under base excitation"
    }
}

/// Viscosity parameter `I eta / (L^3 sqrt(rho A P))` for the reference beam
/// (steel-like section, `eta = 1e-4 E`).
pub fn reference_moving_beam_alpha() -> f64 {
    let (area, inertia, rho, e, len, p): (f64, f64, f64, f64, f64, f64) =
        (1.2e-3, 9e-8, 7680.0, 30e9, 1.0, 6.75e4);
    let eta = 1e-4 * e;
    inertia * eta / (len * len * len * (rho * area * p).sqrt())
}

impl ModelGenerator for MovingBeamGenerator {
    fn defaults(&self) -> Value {
        obj(&[
            ("kf", 0.2.into()),
            ("k1", 23.0940.into()),
            ("gamma", 0.5128.into()),
            ("alpha", reference_moving_beam_alpha().into()),
            ("n", 10.into()),
            ("nonlinear_damping", 1.0.into()),
        ])
    }

    fn generate(&self, params: &Value) -> Result<MechanicalModel> {
        let d = self.defaults();
        check_known(params, &d)?;
        let g = |k| param_f64(params, &d, k);
        let n = g("n")?;
        if n.fract() != 0.0 || n < 2.0 {
            return Err(SsmError::InvalidParameter("beam needs an integer n >= 2".into()));
        }
        moving_beam_model(g("kf")?, g("k1")?, g("gamma")?, g("alpha")?, n as usize, g("nonlinear_damping")? != 0.0)
    }
}

/// Galerkin model of the moving beam on `sin(j pi x)`; forcing
/// `eps Omega^2 g cos(Omega t)` is stored as `f^a = g/2` with power 2.
pub fn moving_beam_model(
    kf: f64,
    k1: f64,
    gamma: f64,
    alpha: f64,
    n: usize,
    nonlinear_damping: bool,
) -> Result<MechanicalModel> {
    if !(0.0..1.0).contains(&gamma) || n < 2 {
        return Err(SsmError::InvalidParameter("moving beam needs 0 <= gamma < 1 and n >= 2".into()));
    }
    let mut c = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for i in 1..=n {
        let ip = i as f64 * PI;
        c[(i - 1, i - 1)] = alpha * ip.powi(4);
        k[(i - 1, i - 1)] = kf * kf * ip.powi(4) - (gamma * gamma - 1.0) * ip * ip;
        for j in (i + 1)..=n {
            if (i + j) % 2 == 1 {
                let (fi, fj) = (i as f64, j as f64);
                let gij = 8.0 * gamma * (fi * fj) / (fi * fi - fj * fj);
                c[(i - 1, j - 1)] = gij;
                c[(j - 1, i - 1)] = -gij;
            }
        }
    }
    let mut terms = Vec::new();
    let pi4 = PI.powi(4);
    for i in 1..=n {
        let i2 = (i * i) as f64;
        for j in 1..=n {
            let j2 = (j * j) as f64;
            terms.push(Term {
                row: i - 1,
                monomial: MultiIndex::from_pairs([(j - 1, 2), (i - 1, 1)]),
                coeff: C64::new(0.25 * k1 * k1 * pi4 * i2 * j2, 0.0),
            });
            if nonlinear_damping {
                terms.push(Term {
                    row: i - 1,
                    monomial: MultiIndex::from_pairs([(j - 1, 1), (n + j - 1, 1), (i - 1, 1)]),
                    coeff: C64::new(0.5 * alpha * k1 * k1 / (kf * kf) * pi4 * i2 * j2, 0.0),
                });
            }
        }
    }
    let nl = PolynomialMap::from_terms(2 * n, n, terms)?;
    let g = DVector::from_iterator(
        n,
        (1..=n).map(|i| if i % 2 == 1 { 1.0 / (i as f64 * PI) } else { 0.0 }),
    );
    let model = MechanicalModel::new(DMatrix::identity(n, n), c, k, nl, g)?;
    Ok(model.with_name("moving-beam").with_forcing_omega_power(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn roots_satisfy_characteristic_equation() {
        let r = hinged_clamped_roots(10).unwrap();
        for (k, x) in r.iter().enumerate() {
            assert!((x.tan() - x.tanh()).abs() < 1e-9);
            assert!((x - (k as f64 + 1.25) * PI).abs() < 0.01);
        }
    }

    #[test]
    fn eigenfunctions_meet_boundary_conditions() {
        let ints = beam_integrals(2.0, 6, 32).unwrap();
        for m in &ints.modes {
            let (p0, _, d20) = m.eval(0.0);
            let (pl, d1l, _) = m.eval(2.0);
            assert!(p0.abs() < 1e-12 && d20.abs() < 1e-9);
            assert!(pl.abs() < 1e-9 && d1l.abs() < 1e-8 * m.beta);
        }
    }

    #[test]
    fn integration_by_parts_identity() {
        let ints = converged_beam_integrals(2.0, 8).unwrap();
        let scale = ints.b.amax();
        assert!((&ints.a + &ints.b).amax() <= 1e-9 * scale);
    }

    #[test]
    fn alpha_tensor_symmetric_in_middle_indices() {
        let ints = converged_beam_integrals(2.0, 4).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                assert_eq!(ints.b[(j, k)], ints.b[(k, j)]);
            }
        }
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let a = converged_beam_integrals(2.0, 10).unwrap();
        let b = beam_integrals(2.0, 10, a.panels * 2).unwrap();
        for (x, y) in a.b.iter().zip(b.b.iter()) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn chain_term_count_and_forcing() {
        let m = chain_model(5e-4, 1e-3, 1.5e-3, 1e-3, 1.0).unwrap();
        assert_eq!(m.nonlinearity.len(), 15);
        assert_eq!(m.forcing.as_slice(), &[0.5, 0.0, 0.0]);
        let lin = chain_model(5e-4, 1e-3, 1.5e-3, 0.0, 1.0).unwrap();
        assert!(lin.nonlinearity.is_empty());
    }

    #[test]
    fn moving_beam_gyroscopic_antisymmetry() {
        let m = moving_beam_model(0.2, 23.094, 0.5128, 3.4e-4, 10, true).unwrap();
        let g = &m.damping - DMatrix::from_diagonal(&m.damping.diagonal());
        assert_eq!(&g + g.transpose(), DMatrix::zeros(10, 10));
        let still = moving_beam_model(0.2, 23.094, 0.0, 3.4e-4, 10, true).unwrap();
        assert!(still.is_symmetric());
    }

    #[test]
    fn unknown_parameter_rejected() {
        let reg = model_registry();
        let g = reg.get("chain").unwrap();
        let err = g.generate(&serde_json::json!({"c7": 1.0})).unwrap_err();
        assert!(matches!(err, SsmError::InvalidParameter(_)));
    }
}
