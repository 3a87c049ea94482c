//! Order-by-order solution of the autonomous invariance equation
//! `B DW(p) R(p) = A W(p) + F(W(p))` in normal-form style.

use std::collections::HashMap;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, SsmError};
use crate::linalg::{bordered_solve, to_complex, ComplexLu};
use crate::model::FirstOrderSystem;
use crate::poly::{MultiIndex, PolynomialMap, Term, C64};
use crate::series::MonomialBasis;
use crate::spectral::{join_index, split_index, MasterSubspace, ResonantPair};

/// Shifted solves with a condition estimate above this are treated as a
/// resonance that the resonance sets missed.
pub const CONDITION_LIMIT: f64 = 1e12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Coefficient tables of `W` and `R` over the monomial basis in
/// `p = (q_1, conj q_1, ..., q_m, conj q_m)`.
#[derive(Clone, Debug)]
pub struct AutonomousSsm {
    pub order: u32,
    pub m: usize,
    pub dim: usize,
    pub basis: MonomialBasis,
    /// `w[idx]` is the 2n-vector coefficient of monomial `idx`.
    pub w: Vec<DVector<C64>>,
    /// `r[idx]` is the 2m-vector coefficient of monomial `idx`.
    pub r: Vec<DVector<C64>>,
    /// `gamma[i]` lists `((l, j), coefficient)` for every member of `R_i`.
    pub gamma: Vec<Vec<(ResonantPair, C64)>>,
    pub lambdas: Vec<C64>,
}

/// Rows `c` of `R` in which the monomial `k` is kept.
pub fn resonant_rows(master: &MasterSubspace, k: &[u32]) -> Vec<usize> {
    let (l, j) = split_index(k);
    let mut rows = Vec::new();
    for i in 0..master.m() {
        if master.is_resonant(i, &l, &j) {
            rows.push(2 * i);
        }
        if master.is_resonant(i, &j, &l) {
            rows.push(2 * i + 1);
        }
    }
    rows
}

/// Exponent vector of the conjugate monomial (swap `q_i` and `conj q_i`).
pub fn conjugate_exponents(k: &[u32]) -> Vec<u32> {
    k.chunks(2).flat_map(|c| [c[1], c[0]]).collect()
}

/// Truncated composition `F(W)` with products memoized by factor prefix.
pub struct Composer<'a> {
    basis: &'a MonomialBasis,
    components: Vec<Vec<C64>>,
    cache: HashMap<Vec<usize>, Vec<C64>>,
    max_out: u32,
}

impl<'a> Composer<'a> {
    /// `w` must have no constant part.
    pub fn new(basis: &'a MonomialBasis, w: &[DVector<C64>], dim: usize, max_out: u32) -> Self {
        let components = (0..dim)
            .map(|v| w.iter().map(|c| c[v]).collect::<Vec<C64>>())
            .collect();
        Composer { basis, components, cache: HashMap::new(), max_out }
    }

    /// Series of the product of `W_f` over `factors` (sorted).
    fn product(&mut self, factors: &[usize]) -> Vec<C64> {
        if let Some(s) = self.cache.get(factors) {
            return s.clone();
        }
        let out = if factors.len() == 1 {
            self.components[factors[0]].clone()
        } else {
            let head = self.product(&factors[..factors.len() - 1]);
            let last = &self.components[factors[factors.len() - 1]];
            self.basis.mul(&head, last, self.max_out)
        };
        self.cache.insert(factors.to_vec(), out.clone());
        out
    }

    /// Full truncated series of `F(W)`, one series per row of `F`.
    pub fn compose(&mut self, f: &PolynomialMap) -> Vec<Vec<C64>> {
        let mut rows = vec![self.basis.zero_series(); f.codim()];
        for t in f.terms() {
            if t.monomial.degree() > self.max_out {
                continue;
            }
            let factors = t.monomial.factors();
            let s = self.product(&factors);
            for (acc, &v) in rows[t.row].iter_mut().zip(&s) {
                *acc += t.coeff * v;
            }
        }
        rows
    }
}

impl AutonomousSsm {
    pub fn coordinate_count(&self) -> usize {
        2 * self.m
    }

    /// Rebuilds `gamma` from the `R` table.
    fn collect_gamma(&mut self, master: &MasterSubspace) {
        self.gamma = (0..self.m)
            .map(|i| {
                master.resonance_sets[i]
                    .iter()
                    .filter_map(|(l, j)| {
                        let k = join_index(l, j);
                        let idx = self.basis.index_of(&k)?;
                        Some(((l.clone(), j.clone()), self.r[idx][2 * i]))
                    })
                    .collect()
            })
            .collect();
    }

    pub fn w_map(&self) -> PolynomialMap {
        table_to_map(&self.basis, &self.w, self.dim)
    }

    pub fn r_map(&self) -> PolynomialMap {
        table_to_map(&self.basis, &self.r, 2 * self.m)
    }

    fn monomials(&self, p: &[C64]) -> Vec<C64> {
        let n = self.basis.len();
        let mut vals = vec![ZERO; n];
        for (idx, v) in vals.iter_mut().enumerate() {
            let mut x = C64::new(1.0, 0.0);
            for (c, &e) in self.basis.exps(idx).iter().enumerate() {
                if e > 0 {
                    x *= p[c].powu(e);
                }
            }
            *v = x;
        }
        vals
    }

    pub fn eval_w(&self, p: &[C64]) -> DVector<C64> {
        let vals = self.monomials(p);
        let mut out = DVector::zeros(self.dim);
        for (idx, w) in self.w.iter().enumerate() {
            if vals[idx] != ZERO {
                out.axpy(vals[idx], w, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `R(p)`, the autonomous reduced dynamics.
    pub fn eval_r(&self, p: &[C64]) -> DVector<C64> {
        let vals = self.monomials(p);
        let mut out = DVector::zeros(2 * self.m);
        for (idx, r) in self.r.iter().enumerate() {
            if r.iter().any(|z| *z != ZERO) {
                out.axpy(vals[idx], r, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `D_p W(p)`, a `2n x 2m` matrix.
    pub fn eval_dw(&self, p: &[C64]) -> DMatrix<C64> {
        let nv = 2 * self.m;
        let mut out = DMatrix::zeros(self.dim, nv);
        for (idx, w) in self.w.iter().enumerate() {
            let e = self.basis.exps(idx);
            for c in 0..nv {
                if e[c] == 0 {
                    continue;
                }
                let mut x = C64::new(e[c] as f64, 0.0);
                for (v, &ev) in e.iter().enumerate() {
                    let ev = if v == c { ev - 1 } else { ev };
                    if ev > 0 {
                        x *= p[v].powu(ev);
                    }
                }
                let mut col = out.column_mut(c);
                col.axpy(x, w, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `B DW(p) R(p) - A W(p) - F(W(p))`.
    pub fn invariance_residual(&self, sys: &FirstOrderSystem, p: &[C64]) -> DVector<C64> {
        let w = self.eval_w(p);
        let dw = self.eval_dw(p);
        let r = self.eval_r(p);
        let b = to_complex(&sys.b);
        let a = to_complex(&sys.a);
        let f = DVector::from_vec(sys.f.eval(w.as_slice()).expect("dimension matches"));
        b * (dw * r) - a * &w - f
    }
}

/// Multiplies univariate polynomials with vector-valued and scalar
/// coefficients, truncated at `max_deg`.
fn upoly_scale(a: &[DVector<C64>], b: &[C64], max_deg: usize) -> Vec<DVector<C64>> {
    let dim = a.first().map_or(0, |v| v.len());
    let mut out = vec![DVector::zeros(dim); max_deg + 1];
    for (da, va) in a.iter().enumerate() {
        for (db, &cb) in b.iter().enumerate() {
            if da + db <= max_deg && cb != ZERO {
                out[da + db].axpy(cb, va, C64::new(1.0, 0.0));
            }
        }
    }
    out
}

impl AutonomousSsm {
    /// Coefficients `c_d` of the invariance residual along a ray,
    /// `res(t p) = sum_d t^d c_d`, for `d = 0..=max_deg`. Every degree is
    /// assembled separately, so no cancellation happens between degrees.
    pub fn residual_profile(&self, sys: &FirstOrderSystem, p: &[C64]) -> Vec<DVector<C64>> {
        let nv = 2 * self.m;
        let f_deg = sys.f.max_degree().unwrap_or(1) as usize;
        let order = self.order as usize;
        let max_deg = (f_deg * order).max(2 * order);
        let vals = self.monomials(p);
        // W(t p) and dW/dp_c(t p) as polynomials in t.
        let mut wt = vec![DVector::zeros(self.dim); max_deg + 1];
        let mut dwt = vec![vec![DVector::zeros(self.dim); max_deg + 1]; nv];
        let mut rt = vec![vec![ZERO; max_deg + 1]; nv];
        for idx in 0..self.basis.len() {
            let e = self.basis.exps(idx);
            let d = self.basis.degree_of(idx) as usize;
            wt[d].axpy(vals[idx], &self.w[idx], C64::new(1.0, 0.0));
            for c in 0..nv {
                rt[c][d] += self.r[idx][c] * vals[idx];
                if e[c] == 0 {
                    continue;
                }
                let mut x = C64::new(e[c] as f64, 0.0);
                for (v, &ev) in e.iter().enumerate() {
                    let ev = if v == c { ev - 1 } else { ev };
                    if ev > 0 {
                        x *= p[v].powu(ev);
                    }
                }
                dwt[c][d - 1].axpy(x, &self.w[idx], C64::new(1.0, 0.0));
            }
        }
        let b = to_complex(&sys.b);
        let a = to_complex(&sys.a);
        let mut res = vec![DVector::zeros(self.dim); max_deg + 1];
        for c in 0..nv {
            let prod = upoly_scale(&dwt[c], &rt[c], max_deg);
            for (d, v) in prod.iter().enumerate() {
                res[d] += &b * v;
            }
        }
        for d in 0..=max_deg {
            res[d] -= &a * &wt[d];
        }
        // F(W(t p)) by univariate composition, term by term.
        for term in sys.f.terms() {
            let mut acc: Vec<C64> = vec![C64::new(1.0, 0.0)];
            for &(pos, e) in term.monomial.pairs() {
                for _ in 0..e {
                    let comp: Vec<C64> = wt.iter().map(|v| v[pos]).collect();
                    let mut next = vec![ZERO; (acc.len() + max_deg).min(max_deg + 1)];
                    for (i, &x) in acc.iter().enumerate() {
                        if x == ZERO {
                            continue;
                        }
                        for (j, &y) in comp.iter().enumerate() {
                            if i + j <= max_deg {
                                next[i + j] += x * y;
                            }
                        }
                    }
                    acc = next;
                }
            }
            for (d, &x) in acc.iter().enumerate() {
                res[d][term.row] -= term.coeff * x;
            }
        }
        res
    }
}

fn table_to_map(basis: &MonomialBasis, table: &[DVector<C64>], codim: usize) -> PolynomialMap {
    let mut terms = Vec::new();
    for (idx, v) in table.iter().enumerate() {
        let mono = basis.multi_index(idx);
        for (row, &c) in v.iter().enumerate() {
            if c != ZERO {
                terms.push(Term { row, monomial: mono.clone(), coeff: c });
            }
        }
    }
    PolynomialMap::from_terms(basis.nvars(), codim, terms).expect("table fits its basis")
}

/// Recursive solution up to `order`; resonance sets of `master` must be final.
pub fn compute_autonomous_ssm(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    order: u32,
) -> Result<AutonomousSsm> {
    if order < 1 {
        return Err(SsmError::InvalidParameter("SSM order must be at least 1".into()));
    }
    let m = master.m();
    let nv = 2 * m;
    let dim = sys.dim();
    let basis = MonomialBasis::new(nv, order);
    let lambdas = master.coordinate_eigenvalues();
    let vmat = master.right_matrix();
    let umat = master.left_matrix();
    let a = to_complex(&sys.a);
    let b = to_complex(&sys.b);
    let bv = &b * &vmat;
    let ub = umat.adjoint() * &b;

    let mut w = vec![DVector::zeros(dim); basis.len()];
    let mut r = vec![DVector::zeros(nv); basis.len()];
    for c in 0..nv {
        let mut e = vec![0u32; nv];
        e[c] = 1;
        let idx = basis.index_of(&e).unwrap();
        w[idx] = vmat.column(c).into_owned();
        r[idx][c] = lambdas[c];
    }

    // Nonzero higher-order R entries: (coordinate, monomial index, value).
    let mut r_terms: Vec<(usize, usize, C64)> = Vec::new();

    for j in 2..=order {
        let fw = {
            let mut comp = Composer::new(&basis, &w, dim, j);
            comp.compose(&sys.f)
        };
        let range = basis.degree_range(j);
        // C_k = [F(W)]_k - B D_k with D_k the lower-order part of (DW R)_k.
        let mut dk: HashMap<usize, DVector<C64>> = HashMap::new();
        for &(c, ridx, val) in &r_terms {
            let dr = basis.degree_of(ridx);
            if dr > j - 1 {
                continue;
            }
            let dw = j + 1 - dr;
            if dw < 2 {
                continue;
            }
            let er = basis.exps(ridx).to_vec();
            for widx in basis.degree_range(dw) {
                let ew = basis.exps(widx);
                if ew[c] == 0 {
                    continue;
                }
                let mut e: Vec<u32> = ew.iter().zip(&er).map(|(x, y)| x + y).collect();
                e[c] -= 1;
                let k = basis.index_of(&e).unwrap();
                let entry = dk.entry(k).or_insert_with(|| DVector::zeros(dim));
                entry.axpy(val * ew[c] as f64, &w[widx], C64::new(1.0, 0.0));
            }
        }
        let solved: Vec<Result<(usize, DVector<C64>, DVector<C64>)>> = range
            .clone()
            .into_par_iter()
            .map(|idx| {
                let mut ck = DVector::from_iterator(dim, fw.iter().map(|row| row[idx]));
                if let Some(d) = dk.get(&idx) {
                    ck -= &b * d;
                }
                let k = basis.exps(idx);
                let sigma: C64 = k.iter().zip(&lambdas).map(|(&e, &l)| l * e as f64).sum();
                let rows = resonant_rows(master, k);
                let mut rk = DVector::zeros(nv);
                if ck.iter().all(|z| *z == ZERO) {
                    return Ok((idx, DVector::zeros(dim), rk));
                }
                let shifted = &a - &b * sigma;
                let rhs = -&ck;
                if rows.is_empty() {
                    let lu = ComplexLu::new(shifted);
                    let cond = lu.condition_estimate();
                    if cond > CONDITION_LIMIT {
                        return Err(SsmError::UndetectedResonance(format!(
                            "{} (condition estimate {cond:.2e})",
                            MultiIndex::from_dense(k)
                        )));
                    }
                    let wk = lu.solve(&rhs)?;
                    Ok((idx, wk, rk))
                } else {
                    let p = -DMatrix::from_columns(
                        &rows.iter().map(|&c| bv.column(c).into_owned()).collect::<Vec<_>>(),
                    );
                    let q = DMatrix::from_rows(
                        &rows.iter().map(|&c| ub.row(c).into_owned()).collect::<Vec<_>>(),
                    );
                    let (wk, y) = bordered_solve(&shifted, &p, &q, &rhs)?;
                    for (t, &c) in rows.iter().enumerate() {
                        rk[c] = y[t];
                    }
                    Ok((idx, wk, rk))
                }
            })
            .collect();
        for res in solved {
            let (idx, wk, rk) = res?;
            for (c, &v) in rk.iter().enumerate() {
                if v != ZERO {
                    r_terms.push((c, idx, v));
                }
            }
            w[idx] = wk;
            r[idx] = rk;
        }
        debug!(target: "ssm-auto", "degree {j} solved ({} monomials)", range.len());
    }

    let mut ssm = AutonomousSsm { order, m, dim, basis, w, r, gamma: Vec::new(), lambdas };
    ssm.collect_gamma(master);
    Ok(ssm)
}

/// `R_i(p) = lambda_i q_i + sum gamma q^l conj(q)^j` on odd rows with the
/// conjugates on even rows (1-based numbering).
pub fn reduced_field_complex(ssm: &AutonomousSsm, p: &[C64]) -> DVector<C64> {
    let m = ssm.m;
    let mut out = DVector::zeros(2 * m);
    for i in 0..m {
        let mut v = ssm.lambdas[2 * i] * p[2 * i];
        let mut vc = ssm.lambdas[2 * i + 1] * p[2 * i + 1];
        for ((l, j), g) in &ssm.gamma[i] {
            let mut mono = *g;
            let mut monoc = g.conj();
            for c in 0..m {
                mono *= p[2 * c].powu(l[c]) * p[2 * c + 1].powu(j[c]);
                monoc *= p[2 * c + 1].powu(l[c]) * p[2 * c].powu(j[c]);
            }
            v += mono;
            vc += monoc;
        }
        out[2 * i] = v;
        out[2 * i + 1] = vc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_swap() {
        assert_eq!(conjugate_exponents(&[2, 1, 0, 3]), vec![1, 2, 3, 0]);
    }

    #[test]
    fn composer_matches_direct_evaluation() {
        // W in two variables mapping to R^2; F = z0^2 z1 + 3 z1^3.
        // Degree 6 holds F(W) exactly.
        let basis = MonomialBasis::new(2, 6);
        let mut w = vec![DVector::zeros(2); basis.len()];
        w[basis.index_of(&[1, 0]).unwrap()] = DVector::from_vec(vec![C64::new(1.0, 0.5), C64::new(0.2, 0.0)]);
        w[basis.index_of(&[0, 1]).unwrap()] = DVector::from_vec(vec![C64::new(0.3, 0.0), C64::new(1.0, -1.0)]);
        w[basis.index_of(&[1, 1]).unwrap()] = DVector::from_vec(vec![C64::new(0.1, 0.0), C64::new(0.0, 0.4)]);
        let mut f = PolynomialMap::zero(2, 1);
        f.push(0, MultiIndex::from_factors(&[0, 0, 1]), C64::new(1.0, 0.0));
        f.push(0, MultiIndex::from_factors(&[1, 1, 1]), C64::new(3.0, 0.0));
        f.canonicalize();
        let fw = Composer::new(&basis, &w, 2, 6).compose(&f);
        let p = [C64::new(1e-2, 2e-3), C64::new(-3e-3, 1e-2)];
        let wp: Vec<C64> = (0..2)
            .map(|v| (0..basis.len()).map(|i| w[i][v] * basis.multi_index(i).eval_complex(&p)).sum())
            .collect();
        let direct = f.eval(&wp).unwrap()[0];
        let via = basis.eval(&fw[0], &p);
        assert!((direct - via).norm() < 1e-14 * direct.norm().max(1e-300) + 1e-18);
    }
}
