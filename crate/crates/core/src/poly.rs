//! Sparse multivariate polynomial maps with canonical multi-index ordering.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};

pub type C64 = Complex64;

/// Exponent map over variable positions, stored sparsely as sorted
/// `(position, exponent)` pairs with nonzero exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex(Vec<(usize, u32)>);

impl MultiIndex {
    pub fn one() -> Self {
        MultiIndex(Vec::new())
    }

    /// Builds a multi-index from arbitrary pairs; repeated positions are summed.
    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut v: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        v.sort_by_key(|&(p, _)| p);
        let mut out: Vec<(usize, u32)> = Vec::with_capacity(v.len());
        for (p, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == p => last.1 += e,
                _ => out.push((p, e)),
            }
        }
        MultiIndex(out)
    }

    pub fn from_dense(exps: &[u32]) -> Self {
        MultiIndex(
            exps.iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(p, &e)| (p, e))
                .collect(),
        )
    }

    /// Product of single variables, e.g. `[0, 0, 1]` is `z0^2 z1`.
    pub fn from_factors(factors: &[usize]) -> Self {
        MultiIndex::from_pairs(factors.iter().map(|&p| (p, 1)))
    }

    pub fn to_dense(&self, dim: usize) -> Vec<u32> {
        let mut d = vec![0; dim];
        for &(p, e) in &self.0 {
            d[p] = e;
        }
        d
    }

    pub fn pairs(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, pos: usize) -> u32 {
        self.0
            .iter()
            .find(|&&(p, _)| p == pos)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn max_position(&self) -> Option<usize> {
        self.0.last().map(|&(p, _)| p)
    }

    pub fn mul(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex::from_pairs(self.0.iter().chain(other.0.iter()).copied())
    }

    /// Divides by `z_pos`, returning `None` if the exponent is zero.
    pub fn reduce(&self, pos: usize) -> Option<MultiIndex> {
        let mut v = self.0.clone();
        let i = v.iter().position(|&(p, _)| p == pos)?;
        v[i].1 -= 1;
        if v[i].1 == 0 {
            v.remove(i);
        }
        Some(MultiIndex(v))
    }

    /// Expanded list of repeated factors, sorted by position.
    pub fn factors(&self) -> Vec<usize> {
        self.0
            .iter()
            .flat_map(|&(p, e)| std::iter::repeat_n(p, e as usize))
            .collect()
    }

    pub fn eval_complex(&self, point: &[C64]) -> C64 {
        self.0
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &(p, e)| acc * point[p].powu(e))
    }

    pub fn eval_real(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .fold(1.0, |acc, &(p, e)| acc * point[p].powi(e as i32))
    }
}

impl Ord for MultiIndex {
    /// Graded lexicographic: lower total degree first; inside one degree the
    /// index with the larger exponent at the first differing position first.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            let pa = a.get(i).map(|x| x.0);
            let pb = b.get(j).map(|x| x.0);
            let p = match (pa, pb) {
                (None, None) => return Ordering::Equal,
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (Some(x), Some(y)) => x.min(y),
            };
            let ea = if pa == Some(p) { a[i].1 } else { 0 };
            let eb = if pb == Some(p) { b[j].1 } else { 0 };
            if ea != eb {
                return eb.cmp(&ea);
            }
            if pa == Some(p) {
                i += 1;
            }
            if pb == Some(p) {
                j += 1;
            }
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|&(p, e)| if e == 1 { format!("z{p}") } else { format!("z{p}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub row: usize,
    pub monomial: MultiIndex,
    pub coeff: C64,
}

/// Map `C^dim -> C^codim`, one sparse polynomial per output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMap {
    dim: usize,
    codim: usize,
    terms: Vec<Term>,
}

impl PolynomialMap {
    pub fn zero(dim: usize, codim: usize) -> Self {
        PolynomialMap { dim, codim, terms: Vec::new() }
    }

    /// Builds and canonicalizes a map from raw terms.
    pub fn from_terms(dim: usize, codim: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.row >= codim {
                return Err(SsmError::DimensionMismatch(format!(
                    "term row {} outside codomain of dimension {codim}",
                    t.row
                )));
            }
            if let Some(p) = t.monomial.max_position() {
                if p >= dim {
                    return Err(SsmError::DimensionMismatch(format!(
                        "monomial position {p} outside domain of dimension {dim}"
                    )));
                }
            }
        }
        let mut map = PolynomialMap { dim, codim, terms };
        map.canonicalize();
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, row: usize, monomial: MultiIndex, coeff: C64) {
        self.terms.push(Term { row, monomial, coeff });
    }

    /// Sorts terms by (row, graded-lex monomial), sums duplicates and drops
    /// coefficients that cancel to exactly zero.
    pub fn canonicalize(&mut self) {
        let mut terms = std::mem::take(&mut self.terms);
        terms.sort_by(|a, b| a.row.cmp(&b.row).then_with(|| a.monomial.cmp(&b.monomial)));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.row == t.row && last.monomial == t.monomial => {
                    last.coeff += t.coeff
                }
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != C64::new(0.0, 0.0));
        self.terms = out;
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.monomial.degree()).min()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.terms.iter().map(|t| t.monomial.degree()).max()
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.im == 0.0)
    }

    pub fn scaled(&self, alpha: C64) -> PolynomialMap {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= alpha;
        }
        out.canonicalize();
        out
    }

    pub fn sum(&self, other: &PolynomialMap) -> Result<PolynomialMap> {
        if self.dim != other.dim || self.codim != other.codim {
            return Err(SsmError::DimensionMismatch("polynomial sum".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        PolynomialMap::from_terms(self.dim, self.codim, terms)
    }

    pub fn eval(&self, point: &[C64]) -> Result<Vec<C64>> {
        if point.len() != self.dim {
            return Err(SsmError::DimensionMismatch(format!(
                "evaluation point has length {}, map expects {}",
                point.len(),
                self.dim
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.codim];
        for t in &self.terms {
            out[t.row] += t.coeff * t.monomial.eval_complex(point);
        }
        Ok(out)
    }

    /// Real-valued evaluation using the real parts of the coefficients.
    pub fn eval_real(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dim {
            return Err(SsmError::DimensionMismatch(format!(
                "evaluation point has length {}, map expects {}",
                point.len(),
                self.dim
            )));
        }
        let mut out = vec![0.0; self.codim];
        for t in &self.terms {
            out[t.row] += t.coeff.re * t.monomial.eval_real(point);
        }
        Ok(out)
    }

    /// Compiles the real part of the map into a flat form with precomputed
    /// partial derivatives for repeated evaluation.
    pub fn to_real(&self) -> RealPolynomial {
        RealPolynomial::new(self)
    }

    /// Moves every row `r` to `offset + r` in a codomain of size `codim`.
    pub fn embed_rows(&self, codim: usize, offset: usize, scale: f64) -> Result<PolynomialMap> {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                row: t.row + offset,
                monomial: t.monomial.clone(),
                coeff: t.coeff * scale,
            })
            .collect();
        PolynomialMap::from_terms(self.dim, codim, terms)
    }
}

#[derive(Clone, Debug)]
struct RealTerm {
    row: usize,
    vars: Vec<(usize, i32)>,
    coeff: f64,
}

/// Real polynomial map with per-term derivative data, used in time integration.
#[derive(Clone, Debug)]
pub struct RealPolynomial {
    dim: usize,
    codim: usize,
    terms: Vec<RealTerm>,
}

impl RealPolynomial {
    fn new(map: &PolynomialMap) -> Self {
        let terms = map
            .terms
            .iter()
            .filter(|t| t.coeff.re != 0.0)
            .map(|t| RealTerm {
                row: t.row,
                vars: t.monomial.pairs().iter().map(|&(p, e)| (p, e as i32)).collect(),
                coeff: t.coeff.re,
            })
            .collect();
        RealPolynomial { dim: map.dim, codim: map.codim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for &(p, e) in &t.vars {
                v *= point[p].powi(e);
            }
            out[t.row] += v;
        }
    }

    pub fn eval(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.codim];
        self.eval_into(point, &mut out);
        out
    }

    /// Dense Jacobian `d out / d point`.
    pub fn jacobian(&self, point: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.codim, self.dim);
        self.jacobian_into(point, &mut jac);
        jac
    }

    pub fn jacobian_into(&self, point: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for t in &self.terms {
            for (k, &(p, e)) in t.vars.iter().enumerate() {
                let mut v = t.coeff * e as f64 * point[p].powi(e - 1);
                for (k2, &(p2, e2)) in t.vars.iter().enumerate() {
                    if k2 != k {
                        v *= point[p2].powi(e2);
                    }
                }
                jac[(t.row, p)] += v;
            }
        }
    }
}
