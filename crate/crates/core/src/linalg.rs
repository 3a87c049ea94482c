//! Dense complex solves with a cheap 1-norm condition estimate.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Result, SsmError};
use crate::poly::C64;

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization of a square complex matrix together with the
/// factorization of its adjoint, used for condition estimation.
pub struct ComplexLu {
    lu: LU<C64, Dyn, Dyn>,
    adj: LU<C64, Dyn, Dyn>,
    norm1: f64,
    n: usize,
}

impl ComplexLu {
    pub fn new(m: DMatrix<C64>) -> Self {
        let n = m.nrows();
        let norm1 = norm1(&m);
        let adj = m.adjoint().lu();
        ComplexLu { lu: m.lu(), adj, norm1, n }
    }

    pub fn solve(&self, rhs: &DVector<C64>) -> Result<DVector<C64>> {
        let x = self
            .lu
            .solve(rhs)
            .ok_or_else(|| SsmError::LinearSolve("singular matrix".into()))?;
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SsmError::LinearSolve("non-finite solution".into()));
        }
        Ok(x)
    }

    /// Hager-Higham estimate of the 1-norm condition number; infinite for
    /// an exactly singular factorization.
    pub fn condition_estimate(&self) -> f64 {
        if !self.lu.is_invertible() || !self.adj.is_invertible() {
            return f64::INFINITY;
        }
        let n = self.n;
        let mut x = DVector::from_element(n, C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for iter in 0..5 {
            let y = match self.lu.solve(&x) {
                Some(y) => y,
                None => return f64::INFINITY,
            };
            let e: f64 = y.iter().map(|z| z.norm()).sum();
            if iter > 0 && e <= est {
                break;
            }
            est = e;
            let xi = y.map(|z| {
                let a = z.norm();
                if a == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    z / a
                }
            });
            let z = match self.adj.solve(&xi) {
                Some(z) => z,
                None => return f64::INFINITY,
            };
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx = z.dotc(&x).re;
            if iter > 0 && zmax <= ztx {
                break;
            }
            x = DVector::from_element(n, C64::new(0.0, 0.0));
            x[jmax] = C64::new(1.0, 0.0);
        }
        if !est.is_finite() {
            return f64::INFINITY;
        }
        est * self.norm1
    }
}

/// Solves `[[M, P], [Q, 0]] [x; y] = [rhs; 0]` with `P` of size `N x r` and
/// `Q` of size `r x N`.
pub fn bordered_solve(
    m: &DMatrix<C64>,
    p: &DMatrix<C64>,
    q: &DMatrix<C64>,
    rhs: &DVector<C64>,
) -> Result<(DVector<C64>, DVector<C64>)> {
    let n = m.nrows();
    let r = p.ncols();
    let mut big = DMatrix::zeros(n + r, n + r);
    big.view_mut((0, 0), (n, n)).copy_from(m);
    big.view_mut((0, n), (n, r)).copy_from(p);
    big.view_mut((n, 0), (r, n)).copy_from(q);
    let mut full = DVector::zeros(n + r);
    full.rows_mut(0, n).copy_from(rhs);
    let sol = big
        .lu()
        .solve(&full)
        .ok_or_else(|| SsmError::LinearSolve("singular bordered system".into()))?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SsmError::LinearSolve("non-finite bordered solution".into()));
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, r).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_estimate_of_diagonal() {
        let mut m = DMatrix::from_element(3, 3, C64::new(0.0, 0.0));
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::new(1e-6, 0.0);
        m[(2, 2)] = C64::new(0.0, 2.0);
        let lu = ComplexLu::new(m);
        let c = lu.condition_estimate();
        assert!((c - 2e6).abs() / 2e6 < 1e-12);
    }

    #[test]
    fn bordered_system_recovers_kernel_component() {
        // M = diag(0, 1): the bordered form with P = Q^T = e_1 is regular.
        let mut m = DMatrix::from_element(2, 2, C64::new(0.0, 0.0));
        m[(1, 1)] = C64::new(1.0, 0.0);
        let mut p = DMatrix::from_element(2, 1, C64::new(0.0, 0.0));
        p[(0, 0)] = C64::new(-1.0, 0.0);
        let q = p.adjoint() * C64::new(-1.0, 0.0);
        let rhs = DVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(2.0, 0.0)]);
        let (x, y) = bordered_solve(&m, &p, &q, &rhs).unwrap();
        assert_eq!(x[0], C64::new(0.0, 0.0));
        assert_eq!(x[1], C64::new(2.0, 0.0));
        assert_eq!(y[0], C64::new(-3.0, 0.0));
    }
}
