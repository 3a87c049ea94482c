//! Dense truncated power series over a fixed set of variables.

use crate::poly::{MultiIndex, C64};

/// Every exponent vector in `nvars` variables with total degree at most
/// `max_degree`, ordered by degree and, inside a degree, with larger leading
/// exponents first. `index_of` is the inverse of the enumeration.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    nvars: usize,
    max_degree: u32,
    exps: Vec<u32>,
    degree_offsets: Vec<usize>,
    binom: Vec<Vec<usize>>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, max_degree: u32) -> Self {
        assert!(nvars <= 32, "at most 32 series variables");
        let nb = max_degree as usize + nvars + 1;
        let mut binom = vec![vec![0usize; nb + 1]; nb + 1];
        for n in 0..=nb {
            binom[n][0] = 1;
            for k in 1..=n {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0 };
            }
        }
        let mut exps = Vec::new();
        let mut degree_offsets = vec![0];
        let mut cur = vec![0u32; nvars];
        for d in 0..=max_degree {
            enumerate_degree(&mut cur, 0, d, &mut exps);
            degree_offsets.push(exps.len() / nvars.max(1));
        }
        if nvars == 0 {
            degree_offsets = vec![0; max_degree as usize + 2];
            degree_offsets[1..].iter_mut().for_each(|o| *o = 1);
        }
        MonomialBasis { nvars, max_degree, exps, degree_offsets, binom }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        *self.degree_offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exps(&self, idx: usize) -> &[u32] {
        &self.exps[idx * self.nvars..(idx + 1) * self.nvars]
    }

    pub fn degree_range(&self, d: u32) -> std::ops::Range<usize> {
        if d > self.max_degree {
            return self.len()..self.len();
        }
        self.degree_offsets[d as usize]..self.degree_offsets[d as usize + 1]
    }

    pub fn degree_of(&self, idx: usize) -> u32 {
        self.exps(idx).iter().sum()
    }

    fn count_le(&self, s: usize, k: usize) -> usize {
        self.binom[s + k][k]
    }

    /// Position of an exponent vector, or `None` past the truncation degree.
    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        debug_assert_eq!(e.len(), self.nvars);
        let d: u32 = e.iter().sum();
        if d > self.max_degree {
            return None;
        }
        let mut rank = self.degree_offsets[d as usize];
        let mut rem = d as usize;
        for (i, &ei) in e.iter().enumerate().take(self.nvars.saturating_sub(1)) {
            let ei = ei as usize;
            if rem > ei {
                rank += self.count_le(rem - ei - 1, self.nvars - i - 1);
            }
            rem -= ei;
        }
        Some(rank)
    }

    pub fn index_of_multi(&self, k: &MultiIndex) -> Option<usize> {
        self.index_of(&k.to_dense(self.nvars))
    }

    pub fn multi_index(&self, idx: usize) -> MultiIndex {
        MultiIndex::from_dense(self.exps(idx))
    }

    /// Index of the product monomial `a * b`, `None` past the truncation.
    pub fn index_of_product(&self, a: usize, b: usize) -> Option<usize> {
        let mut e = [0u32; 32];
        let ea = self.exps(a);
        let eb = self.exps(b);
        for i in 0..self.nvars {
            e[i] = ea[i] + eb[i];
        }
        self.index_of(&e[..self.nvars])
    }

    pub fn zero_series(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.len()]
    }

    /// Truncated product restricted to output degrees `<= max_out`.
    pub fn mul(&self, a: &[C64], b: &[C64], max_out: u32) -> Vec<C64> {
        let mut out = self.zero_series();
        let max_out = max_out.min(self.max_degree);
        let nz_b: Vec<(usize, u32)> = (0..self.len())
            .filter(|&i| b[i] != C64::new(0.0, 0.0))
            .map(|i| (i, self.degree_of(i)))
            .collect();
        let mut e = [0u32; 32];
        for da in 0..=max_out {
            for ia in self.degree_range(da) {
                let ca = a[ia];
                if ca == C64::new(0.0, 0.0) {
                    continue;
                }
                let ea = self.exps(ia);
                for &(ib, db) in &nz_b {
                    if da + db > max_out {
                        continue;
                    }
                    let eb = self.exps(ib);
                    for i in 0..self.nvars {
                        e[i] = ea[i] + eb[i];
                    }
                    let k = self.index_of(&e[..self.nvars]).unwrap();
                    out[k] += ca * b[ib];
                }
            }
        }
        out
    }

    pub fn eval(&self, series: &[C64], point: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (idx, &c) in series.iter().enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut m = c;
            for (v, &e) in self.exps(idx).iter().enumerate() {
                if e > 0 {
                    m *= point[v].powu(e);
                }
            }
            acc += m;
        }
        acc
    }
}

fn enumerate_degree(cur: &mut [u32], pos: usize, rem: u32, out: &mut Vec<u32>) {
    if cur.is_empty() {
        return;
    }
    if pos == cur.len() - 1 {
        cur[pos] = rem;
        out.extend_from_slice(cur);
        cur[pos] = 0;
        return;
    }
    for e in (0..=rem).rev() {
        cur[pos] = e;
        enumerate_degree(cur, pos + 1, rem - e, out);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumeration_and_rank_agree() {
        for nv in 1..6 {
            let b = MonomialBasis::new(nv, 6);
            for i in 0..b.len() {
                assert_eq!(b.index_of(b.exps(i)), Some(i));
            }
        }
    }

    #[test]
    fn ordering_matches_multi_index() {
        let b = MonomialBasis::new(4, 5);
        for i in 1..b.len() {
            assert!(b.multi_index(i - 1) < b.multi_index(i));
        }
    }

    #[test]
    fn basis_size() {
        let b = MonomialBasis::new(4, 5);
        assert_eq!(b.len(), 126);
        assert_eq!(b.degree_range(2).len(), 10);
    }

    proptest! {
        #[test]
        fn product_evaluates_to_pointwise_product(
            ca in proptest::collection::vec(-1.0f64..1.0, 15),
            cb in proptest::collection::vec(-1.0f64..1.0, 15),
            x in proptest::collection::vec(-0.9f64..0.9, 4),
        ) {
            // degree <= 2 series in 4 variables have 15 coefficients; the
            // product of two of them has degree <= 4 and is exact at order 4.
            let b = MonomialBasis::new(4, 4);
            let mut a = b.zero_series();
            let mut bb = b.zero_series();
            for i in 0..15 {
                a[i] = C64::new(ca[i], 0.0);
                bb[i] = C64::new(cb[i], 0.0);
            }
            let p = b.mul(&a, &bb, 4);
            let pt: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
            let lhs = b.eval(&p, &pt);
            let rhs = b.eval(&a, &pt) * b.eval(&bb, &pt);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
