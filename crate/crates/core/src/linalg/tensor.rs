use nalgebra::{DMatrix, DVector};
use super::multiset::{
    binomial, multiset_count, multiset_rank, multisets, rank_unsorted, tau_decode, tau_encode,
};
use super::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Symmetric tensor of order `d` over `[n]` with complex entries, stored once
/// per index multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymmetricTensor {
    order: usize,
    dim: usize,
    entries: Vec<C64>,
}

impl ComplexSymmetricTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            order,
            dim,
            entries: vec![C64::new(0.0, 0.0); multiset_count(dim, order)],
        }
    }

    /// Builds a tensor by evaluating `f` once per canonical (sorted) index tuple.
    pub fn from_fn(dim: usize, order: usize, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let entries = multisets(dim, order).iter().map(|t| f(t)).collect();
        Self {
            order,
            dim,
            entries,
        }
    }

    /// Wraps canonical-order entries (one per multiset, lexicographic rank order).
    pub fn from_canonical(dim: usize, order: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != multiset_count(dim, order) {
            return Err(Error::Shape(format!(
                "expected {} canonical entries for n={dim}, d={order}, got {}",
                multiset_count(dim, order),
                entries.len()
            )));
        }
        Ok(Self {
            order,
            dim,
            entries,
        })
    }

    /// `sum_i coeffs[i] * A_i^{(x) order}` for the columns of `a`.
    pub fn from_rank_one_sum(a: &DMatrix<f64>, coeffs: &[C64], order: usize) -> Result<Self> {
        if coeffs.len() != a.ncols() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} columns",
                coeffs.len(),
                a.ncols()
            )));
        }
        Ok(Self::from_fn(a.nrows(), order, |idx| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * idx.iter().map(|&i| a[(i, j)]).product::<f64>())
                .sum()
        }))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn canonical_entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn canonical_entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    /// Entry at an arbitrary index tuple; symmetric by construction.
    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.order);
        self.entries[rank_unsorted(self.dim, idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let r = rank_unsorted(self.dim, idx);
        self.entries[r] = value;
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::Shape("tensor shapes differ".into()));
        }
        Ok(Self {
            order: self.order,
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Frobenius norm over all `n^d` entries (each multiset weighted by its
    /// number of orderings).
    pub fn frobenius_norm(&self) -> f64 {
        multisets(self.dim, self.order)
            .iter()
            .zip(&self.entries)
            .map(|(t, e)| super::multiset::multiplicity(t) as f64 * e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Square `n^{d/2} x n^{d/2}` matrix with `M[a, b] = T[tau(a), tau(b)]`.
    pub fn flatten(&self) -> Result<ComplexMatrix> {
        if !self.order.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "cannot flatten a tensor of odd order {}",
                self.order
            )));
        }
        let h = self.order / 2;
        let p = self.dim.pow(h as u32);
        let rows: Vec<Vec<usize>> = (0..p).map(|k| tau_decode(k, self.dim, h)).collect();
        let mut buf = vec![0usize; self.order];
        Ok(ComplexMatrix::from_fn(p, p, |a, b| {
            buf[..h].copy_from_slice(&rows[a]);
            buf[h..].copy_from_slice(&rows[b]);
            self.get(&buf)
        }))
    }

    /// Reads a flattened matrix back into a symmetric tensor. Only the entry at
    /// the canonical position of each multiset is consulted.
    pub fn unflatten(m: &ComplexMatrix, dim: usize, order: usize) -> Result<Self> {
        if !order.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "cannot unflatten into odd order {order}"
            )));
        }
        let h = order / 2;
        let p = dim.pow(h as u32);
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::Shape(format!(
                "expected {p}x{p} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(dim, order, |t| {
            m[(tau_encode(&t[..h], dim), tau_encode(&t[h..], dim))]
        }))
    }
}

/// Column `j` is the flattening of `A_j^{(x) d}`.
pub fn khatri_rao_power(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let rows = n.pow(d as u32);
    let mut out = DMatrix::zeros(rows, a.ncols());
    for j in 0..a.ncols() {
        let col = a.column(j);
        let mut v = DVector::from_element(1, 1.0);
        for _ in 0..d {
            v = v.kronecker(&col.clone_owned());
        }
        out.set_column(j, &v);
    }
    out
}

/// Kronecker power `A^{(x) d}` (shape `n^d x m^d`).
pub fn kronecker_power(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..d {
        out = out.kronecker(a);
    }
    out
}

/// Multilinear part of the Khatri-Rao power: rows indexed by the `d`-subsets
/// of `[n]` in lexicographic order, entry `(S, j) = prod_{i in S} A_{i,j}`.
pub fn multilinear_power(a: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if d > n {
        return Err(Error::InvalidArgument(format!(
            "multilinear power of order {d} needs d <= n = {n}"
        )));
    }
    let subsets = subsets_lex(n, d);
    debug_assert_eq!(subsets.len(), binomial(n, d));
    Ok(DMatrix::from_fn(subsets.len(), a.ncols(), |r, j| {
        subsets[r].iter().map(|&i| a[(i, j)]).product()
    }))
}

/// All `d`-subsets of `[n]`, sorted, in lexicographic order.
pub fn subsets_lex(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if d > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        let mut p = d;
        while p > 0 && cur[p - 1] == n - d + p - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        cur[p - 1] += 1;
        for q in p..d {
            cur[q] = cur[q - 1] + 1;
        }
    }
    out
}

/// Rank of a canonical tuple (exposed for file formats).
pub fn canonical_rank(n: usize, sorted: &[usize]) -> usize {
    multiset_rank(n, sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn flatten_rank_one_identity() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let t = ComplexSymmetricTensor::from_rank_one_sum(&a, &[c(1.0)], 2).unwrap();
        let m = t.flatten().unwrap();
        let expect = ComplexMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(m, expect);
    }

    #[test]
    fn flatten_order_four_spot_entry() {
        let t = ComplexSymmetricTensor::from_fn(2, 4, |idx| {
            C64::new(idx.iter().sum::<usize>() as f64 + 1.0, idx[0] as f64 * 0.5)
        });
        let m = t.flatten().unwrap();
        assert_eq!(m, m.transpose());
        let a = tau_encode(&[1, 0], 2);
        assert_eq!(m[(a, a)], t.get(&[1, 0, 1, 0]));
        assert_eq!(m[(a, a)], t.get(&[0, 0, 1, 1]));
    }

    #[test]
    fn odd_order_rejected() {
        let t = ComplexSymmetricTensor::zeros(2, 3);
        assert!(t.flatten().is_err());
    }

    #[test]
    fn khatri_rao_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let k = khatri_rao_power(&id, 2);
        assert_eq!(k.column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(k.column(1).as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        let single = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(khatri_rao_power(&single, 2).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn multilinear_examples() {
        let col = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = multilinear_power(&col, 2).unwrap();
        assert_eq!(m.as_slice(), &[2.0, 3.0, 6.0]);
        let ones = DMatrix::from_element(4, 2, 1.0);
        assert!(multilinear_power(&ones, 3).unwrap().iter().all(|&x| x == 1.0));
        assert!(multilinear_power(&ones, 5).is_err());
    }

    #[test]
    fn multilinear_pm_one_norms() {
        // every entry is +-1, so each column has C(6,3) = 20 unit entries
        let signs = [
            1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0,
            1.0, -1.0, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0,
        ];
        let a = DMatrix::from_column_slice(6, 4, &signs);
        let m = multilinear_power(&a, 3).unwrap();
        for j in 0..4 {
            assert_relative_eq!(m.column(j).norm(), 20f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn frobenius_matches_flattened() {
        let t = ComplexSymmetricTensor::from_fn(3, 4, |idx| {
            C64::new(idx[0] as f64 - idx[3] as f64 * 0.3, (idx[1] * idx[2]) as f64)
        });
        let f = t.flatten().unwrap();
        assert_relative_eq!(t.frobenius_norm(), f.norm(), epsilon = 1e-12);
    }
}
