//! Generalized eigenproblem of the lifted pencil, master-mode selection and
//! resonance bookkeeping.

use std::cmp::Ordering;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_integer::Integer;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Result, SsmError};
use crate::linalg::to_complex;
use crate::model::FirstOrderSystem;
use crate::poly::C64;
use crate::series::MonomialBasis;

pub type Rational = Ratio<i64>;

/// One member of a conjugate pair (the one with `Im >= 0`), or a real mode.
#[derive(Clone, Debug)]
pub struct ModePair {
    pub index: usize,
    pub lambda: C64,
    /// Right eigenvector `A v = lambda B v`, unit norm, largest entry real positive.
    pub right: DVector<C64>,
    /// Left eigenvector `u* A = lambda u* B` with `u* B v = 1`.
    pub left: DVector<C64>,
}

impl ModePair {
    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0
    }

    pub fn damping_ratio(&self) -> f64 {
        -self.lambda.re / self.lambda.norm()
    }

    pub fn natural_frequency(&self) -> f64 {
        self.lambda.norm()
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Leading modes with vectors, sorted.
    pub modes: Vec<ModePair>,
    /// Representative eigenvalue of every pair or real mode, sorted.
    pub representatives: Vec<C64>,
}

impl Spectrum {
    /// All eigenvalues of the pencil with conjugate partners adjacent.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(2 * self.representatives.len());
        for &l in &self.representatives {
            out.push(l);
            if l.im != 0.0 {
                out.push(l.conj());
            }
        }
        out
    }
}

/// Real parts within this relative distance count as equal for ordering.
const RE_TIE: f64 = 1e-9;

fn spectral_order(a: &C64, b: &C64, scale: f64) -> Ordering {
    if (a.re - b.re).abs() <= RE_TIE * scale {
        a.im.abs()
            .partial_cmp(&b.im.abs())
            .unwrap_or(Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
    } else {
        b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal)
    }
}

/// Sorts by decreasing real part; equal real parts by increasing `|Im|`.
fn sort_representatives(reps: &mut [C64]) {
    let scale = reps.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    // Sorting by re first keeps tie groups contiguous, then ties are resolved.
    reps.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal));
    let mut start = 0;
    while start < reps.len() {
        let mut end = start + 1;
        while end < reps.len() && (reps[start].re - reps[end].re).abs() <= RE_TIE * scale {
            end += 1;
        }
        reps[start..end].sort_by(|a, b| spectral_order(a, b, scale));
        start = end;
    }
}

fn normalize_columns(v: &mut DMatrix<C64>) {
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        let (imax, _) = col
            .iter()
            .enumerate()
            .map(|(i, z)| (i, z.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 * (1.0 + 1e-12) { x } else { acc });
        let phase = col[imax] / col[imax].norm();
        col /= phase * nrm;
    }
}

/// Rescales `u` so that `U* B V = I` on a cluster.
fn biorthonormalize(u: &mut DMatrix<C64>, v: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<()> {
    let g = u.adjoint() * b * v;
    let ginv_h = g
        .adjoint()
        .try_inverse()
        .ok_or_else(|| SsmError::EigenFailure("left/right eigenvectors not B-dual".into()))?;
    *u = &*u * ginv_h;
    Ok(())
}

/// Normalizes a single pair: unit right vector with a fixed phase, `u* B v = 1`.
pub fn normalize_pair(
    right: &DVector<C64>,
    left: &DVector<C64>,
    b: &DMatrix<f64>,
) -> Result<(DVector<C64>, DVector<C64>)> {
    let mut v = DMatrix::from_column_slice(right.len(), 1, right.as_slice());
    let mut u = DMatrix::from_column_slice(left.len(), 1, left.as_slice());
    normalize_columns(&mut v);
    biorthonormalize(&mut u, &v, &to_complex(b))?;
    Ok((v.column(0).into_owned(), u.column(0).into_owned()))
}

/// Eigenvalues sorted per the module ordering, followed by eigenvectors of
/// the first `count` pairs (each conjugate pair counts once).
pub fn solve_spectrum(sys: &FirstOrderSystem, count: usize) -> Result<Spectrum> {
    let dim = sys.dim();
    let s = sys
        .b
        .clone()
        .lu()
        .solve(&sys.a)
        .ok_or_else(|| SsmError::EigenFailure("pencil is singular (B not invertible)".into()))?;
    let eig = s.complex_eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SsmError::EigenFailure("non-finite eigenvalue".into()));
    }
    let scale = eig.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut reps: Vec<C64> = Vec::new();
    let mut nreal = 0;
    for z in eig.iter() {
        if z.im.abs() <= 1e-12 * scale {
            reps.push(C64::new(z.re, 0.0));
            nreal += 1;
        } else if z.im > 0.0 {
            reps.push(*z);
        }
    }
    if reps.len() * 2 - nreal != dim {
        return Err(SsmError::EigenFailure("eigenvalues do not close under conjugation".into()));
    }
    sort_representatives(&mut reps);
    let count = count.min(reps.len());
    let anorm = sys.a.norm().max(sys.b.norm());
    let ac = to_complex(&sys.a);
    let bc = to_complex(&sys.b);
    let mut modes: Vec<ModePair> = Vec::with_capacity(count);
    let cluster_tol = 1e-7 * scale;
    let mut idx = 0;
    while idx < count {
        let mut end = idx + 1;
        while end < reps.len() && (reps[end] - reps[idx]).norm() <= cluster_tol {
            end += 1;
        }
        let k = end - idx;
        let lam0 = reps[idx..end].iter().sum::<C64>() / k as f64;
        if lam0.re >= 0.0 {
            return Err(SsmError::UnstableLinearization { re: lam0.re, im: lam0.im });
        }
        let (mut v, mut u, lam) = null_vectors(&ac, &bc, lam0, k, anorm)?;
        normalize_columns(&mut v);
        biorthonormalize(&mut u, &v, &bc)?;
        if lam.im == 0.0 {
            // Real modes get real vectors; the phase rule strips the global phase.
            v.apply(|z| z.im = 0.0);
            u.apply(|z| z.im = 0.0);
            normalize_columns(&mut v);
            biorthonormalize(&mut u, &v, &bc)?;
        }
        for c in 0..k {
            let lambda = if k == 1 { lam } else { lam0 };
            let right = v.column(c).into_owned();
            let left = u.column(c).into_owned();
            let rres = (&ac * &right - &bc * &right * lambda).norm();
            let lres = (left.adjoint() * &ac - left.adjoint() * &bc * lambda).norm();
            if rres > 1e-8 * anorm || lres > 1e-8 * anorm * left.norm() {
                return Err(SsmError::EigenFailure(format!(
                    "eigenvector residual {rres:.3e}/{lres:.3e} too large at {lambda}"
                )));
            }
            reps[idx + c] = lambda;
            if idx + c < count {
                modes.push(ModePair { index: idx + c, lambda, right, left });
            }
        }
        idx = end;
    }
    Ok(Spectrum { modes, representatives: reps })
}

/// Right/left null vectors of `A - lambda B` for a cluster of size `k`; a
/// simple eigenvalue is refined by a few Rayleigh-quotient updates.
fn null_vectors(
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    lam0: C64,
    k: usize,
    anorm: f64,
) -> Result<(DMatrix<C64>, DMatrix<C64>, C64)> {
    let n = a.nrows();
    let mut lam = lam0;
    let iters = if k == 1 { 3 } else { 1 };
    let mut out = None;
    for _ in 0..iters {
        let shifted = a - b * lam;
        let svd = shifted
            .svd(true, true);
        let uu = svd.u.as_ref().ok_or_else(|| SsmError::EigenFailure("SVD failed".into()))?;
        let vt = svd.v_t.as_ref().ok_or_else(|| SsmError::EigenFailure("SVD failed".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap_or(Ordering::Equal)
        });
        let worst = svd.singular_values[order[k - 1]];
        if worst > 1e-6 * anorm {
            return Err(SsmError::DefectiveEigenvalue { re: lam0.re, im: lam0.im });
        }
        let mut v = DMatrix::zeros(n, k);
        let mut u = DMatrix::zeros(n, k);
        for (c, &s) in order[..k].iter().enumerate() {
            v.set_column(c, &vt.row(s).adjoint());
            u.set_column(c, &uu.column(s));
        }
        if k == 1 {
            let vv = v.column(0).into_owned();
            let uv = u.column(0).into_owned();
            let den = uv.dotc(&(b * &vv));
            if den.norm() > 0.0 {
                lam = uv.dotc(&(a * &vv)) / den;
            }
            if (lam - lam0).norm() > 1e-6 * lam0.norm().max(1e-300) {
                lam = lam0;
            }
        }
        out = Some((v, u));
    }
    let (v, u) = out.unwrap();
    if lam0.im == 0.0 {
        lam.im = 0.0;
    }
    Ok((v, u, lam))
}

/// Inner resonance: `lambda_i ~ l . lambda + j . conj(lambda)`.
pub type ResonantPair = (Vec<u32>, Vec<u32>);

#[derive(Clone, Debug)]
pub struct MasterSubspace {
    pub modes: Vec<ModePair>,
    /// Eigenvalue representatives of all computed modes outside the master set.
    pub others: Vec<C64>,
    pub resonance_sets: Vec<Vec<ResonantPair>>,
    pub external: Option<Vec<Rational>>,
    pub tolerance: f64,
    pub max_order: u32,
}

impl MasterSubspace {
    pub fn m(&self) -> usize {
        self.modes.len()
    }

    pub fn lambdas(&self) -> Vec<C64> {
        self.modes.iter().map(|p| p.lambda).collect()
    }

    /// `(lambda_1, conj lambda_1, ..., lambda_m, conj lambda_m)`.
    pub fn coordinate_eigenvalues(&self) -> Vec<C64> {
        self.modes.iter().flat_map(|p| [p.lambda, p.lambda.conj()]).collect()
    }

    /// Columns `(v_1, conj v_1, ...)`.
    pub fn right_matrix(&self) -> DMatrix<C64> {
        let cols: Vec<DVector<C64>> =
            self.modes.iter().flat_map(|p| [p.right.clone(), p.right.conjugate()]).collect();
        DMatrix::from_columns(&cols)
    }

    /// Columns `(u_1, conj u_1, ...)`, dual to `right_matrix` through `B`.
    pub fn left_matrix(&self) -> DMatrix<C64> {
        let cols: Vec<DVector<C64>> =
            self.modes.iter().flat_map(|p| [p.left.clone(), p.left.conjugate()]).collect();
        DMatrix::from_columns(&cols)
    }

    pub fn default_tolerance(&self) -> f64 {
        default_tolerance(&self.modes)
    }

    /// Orbital period multiplier: the response has period `2 pi / (r_d Omega)`.
    pub fn period_divisor(&self) -> Option<Rational> {
        self.external.as_ref().map(|r| rational_gcd(r))
    }

    /// Whether `(l, j)` is retained in `R_i`.
    pub fn is_resonant(&self, i: usize, l: &[u32], j: &[u32]) -> bool {
        self.resonance_sets[i].iter().any(|(ll, jj)| ll == l && jj == j)
    }

    pub fn resonant_pair_count(&self) -> usize {
        self.resonance_sets.iter().map(Vec::len).sum()
    }

    /// Sets the external resonance vector for `omega` and drops members of
    /// `R_i` that violate `<l - j - e_i, r> = 0`.
    pub fn set_external_resonance(
        &mut self,
        omega: f64,
        tol: f64,
        max_denominator: i64,
    ) -> Result<Vec<Rational>> {
        let r = external_resonance_vector(&self.modes, omega, tol, max_denominator)?;
        for (i, set) in self.resonance_sets.iter_mut().enumerate() {
            set.retain(|(l, j)| {
                let ok = lemma_identity(l, j, i, &r);
                if !ok {
                    warn!(
                        target: "spectral",
                        "dropping monomial l={l:?} j={j:?} from R_{} (inconsistent with r)",
                        i + 1
                    );
                }
                ok
            });
        }
        self.external = Some(r.clone());
        Ok(r)
    }
}

pub fn default_tolerance(modes: &[ModePair]) -> f64 {
    0.05 * modes.iter().map(|p| p.lambda.im.abs()).fold(f64::INFINITY, f64::min)
}

/// `<l - j - e_i, r> = 0` in exact arithmetic.
pub fn lemma_identity(l: &[u32], j: &[u32], i: usize, r: &[Rational]) -> bool {
    let mut acc = Rational::from_integer(0);
    for c in 0..r.len() {
        let mut k = l[c] as i64 - j[c] as i64;
        if c == i {
            k -= 1;
        }
        acc += r[c] * k;
    }
    acc == Rational::from_integer(0)
}

fn rational_gcd(r: &[Rational]) -> Rational {
    let num = r.iter().fold(0i64, |g, x| g.gcd(x.numer()));
    let den = r.iter().fold(1i64, |l, x| l.lcm(x.denom()));
    Rational::new(num, den)
}

/// Picks the master modes by pair ordinal.
pub fn select_master(spectrum: &Spectrum, indices: &[usize]) -> Result<MasterSubspace> {
    if indices.is_empty() {
        return Err(SsmError::InvalidSelection("empty master selection".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut modes = Vec::new();
    for &i in indices {
        if !seen.insert(i) {
            return Err(SsmError::InvalidSelection(format!("mode {i} selected twice")));
        }
        let p = spectrum.modes.get(i).ok_or_else(|| {
            SsmError::InvalidSelection(format!(
                "mode {i} outside the {} computed modes",
                spectrum.modes.len()
            ))
        })?;
        if p.is_real() {
            return Err(SsmError::RealEigenvalueSelected(i));
        }
        modes.push(p.clone());
    }
    let others = spectrum
        .representatives
        .iter()
        .enumerate()
        .filter(|(k, _)| !seen.contains(k))
        .map(|(_, &l)| l)
        .collect();
    Ok(MasterSubspace {
        modes,
        others,
        resonance_sets: vec![Vec::new(); indices.len()],
        external: None,
        tolerance: 0.0,
        max_order: 0,
    })
}

/// Splits an exponent vector over `(q_1, conj q_1, ...)` into `(l, j)`.
pub fn split_index(k: &[u32]) -> ResonantPair {
    let l = k.iter().step_by(2).copied().collect();
    let j = k.iter().skip(1).step_by(2).copied().collect();
    (l, j)
}

pub fn join_index(l: &[u32], j: &[u32]) -> Vec<u32> {
    l.iter().zip(j).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Populates every `R_i` by exhaustive enumeration over degrees `2..=max_order`.
pub fn detect_inner_resonances(master: &mut MasterSubspace, max_order: u32, tol: f64) {
    let m = master.m();
    let lam = master.coordinate_eigenvalues();
    let basis = MonomialBasis::new(2 * m, max_order.max(2));
    let mut sets = vec![Vec::new(); m];
    for d in 2..=max_order {
        for idx in basis.degree_range(d) {
            let k = basis.exps(idx);
            let sigma: C64 = k.iter().zip(&lam).map(|(&e, &l)| l * e as f64).sum();
            for (i, set) in sets.iter_mut().enumerate() {
                if (master.modes[i].lambda - sigma).norm() <= tol {
                    set.push(split_index(k));
                }
            }
        }
    }
    master.resonance_sets = sets;
    master.tolerance = tol;
    master.max_order = max_order;
}

/// Smallest-denominator rational `r_i` with `|Im lambda_i - r_i Omega| <= tol`.
pub fn external_resonance_vector(
    modes: &[ModePair],
    omega: f64,
    tol: f64,
    max_denominator: i64,
) -> Result<Vec<Rational>> {
    if !(omega > 0.0) {
        return Err(SsmError::InvalidParameter(format!("excitation frequency {omega} must be positive")));
    }
    modes
        .iter()
        .map(|p| {
            let target = p.lambda.im / omega;
            let lo = (p.lambda.im - tol) / omega;
            let hi = (p.lambda.im + tol) / omega;
            simplest_rational(lo, hi, target, max_denominator)
                .ok_or(SsmError::NoExternalResonance(omega))
        })
        .collect()
}

fn simplest_rational(lo: f64, hi: f64, target: f64, max_den: i64) -> Option<Rational> {
    for q in 1..=max_den {
        let pmin = (lo * q as f64).ceil().max(1.0) as i64;
        let pmax = (hi * q as f64).floor() as i64;
        if pmin > pmax {
            continue;
        }
        let best = (pmin..=pmax)
            .min_by(|&a, &b| {
                let da = (a as f64 / q as f64 - target).abs();
                let db = (b as f64 / q as f64 - target).abs();
                da.partial_cmp(&db).unwrap_or(Ordering::Equal)
            })
            .unwrap();
        return Some(Rational::new(best, q));
    }
    None
}

/// Mode table row for reporting.
#[derive(Clone, Debug, Serialize)]
pub struct ModeRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub damping_ratio: f64,
}

pub fn mode_table(spectrum: &Spectrum) -> Vec<ModeRow> {
    spectrum
        .representatives
        .iter()
        .enumerate()
        .map(|(index, l)| ModeRow { index, re: l.re, im: l.im, damping_ratio: -l.re / l.norm() })
        .collect()
}

/// Smallest distance between a non-master eigenvalue and any master
/// combination `k . lambda` with `2 <= |k| <= max_order`. Only the computed
/// part of the spectrum is checked.
pub fn outer_resonance_margin(master: &MasterSubspace, max_order: u32) -> f64 {
    let lam = master.coordinate_eigenvalues();
    let basis = MonomialBasis::new(lam.len(), max_order.max(2));
    let mut best = f64::INFINITY;
    for d in 2..=max_order {
        for idx in basis.degree_range(d) {
            let sigma: C64 =
                basis.exps(idx).iter().zip(&lam).map(|(&e, &l)| l * e as f64).sum();
            for o in &master.others {
                best = best.min((o - sigma).norm()).min((o.conj() - sigma).norm());
            }
        }
    }
    best
}
