use std::collections::BTreeMap;

use super::CfPartials;
use crate::error::{Error, Result};
use crate::linalg::multiset::multisets;
use crate::linalg::{ComplexSymmetricTensor, C64};

/// Largest supported derivative order.
pub const MAX_EXPANSION_ORDER: usize = 10;

/// One summand of `N_d`: `coeff * prod_j d_{S_j} phi`, where each `S_j` is a
/// set of index positions `0..d` encoded as a bitmask (0 means a bare `phi`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NdTerm {
    pub coeff: i64,
    /// Exactly `d` masks, sorted ascending.
    pub factors: Vec<u32>,
}

/// Numerator of `d_{i_1..i_d} log phi = N_d / phi^d` as a symbolic sum over
/// products of partials of `phi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NdExpansion {
    pub order: usize,
    pub terms: Vec<NdTerm>,
}

impl NdExpansion {
    pub fn abs_coefficient_sum(&self) -> i64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Evaluates `N_d / phi^d` at the index tuple `idx` (sorted or not).
    pub fn evaluate(&self, partials: &CfPartials, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.order);
        let phi = partials.cf();
        let mut sub = Vec::with_capacity(self.order);
        let mut num = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut prod = C64::new(t.coeff as f64, 0.0);
            for &mask in &t.factors {
                if mask == 0 {
                    prod *= phi;
                    continue;
                }
                sub.clear();
                sub.extend((0..self.order).filter(|p| mask >> p & 1 == 1).map(|p| idx[p]));
                sub.sort_unstable();
                prod *= partials.get_sorted(&sub);
            }
            num += prod;
        }
        num / phi.powu(self.order as u32)
    }
}

/// Builds `N_d` from `N_1 = d phi` through
/// `N_{d+1} = (d N_d) phi - d N_d (d phi)`, merging identical products.
pub fn nd_expansion(d: usize) -> Result<NdExpansion> {
    if d == 0 || d > MAX_EXPANSION_ORDER {
        return Err(Error::InvalidArgument(format!(
            "expansion order {d} outside 1..={MAX_EXPANSION_ORDER}"
        )));
    }
    let mut terms: BTreeMap<Vec<u32>, i64> = BTreeMap::new();
    terms.insert(vec![1], 1);
    for k in 1..d {
        let bit = 1u32 << k;
        let mut next: BTreeMap<Vec<u32>, i64> = BTreeMap::new();
        for (factors, &c) in &terms {
            // product rule on N_k, times a bare phi
            for j in 0..factors.len() {
                let mut f = factors.clone();
                f[j] |= bit;
                f.push(0);
                f.sort_unstable();
                *next.entry(f).or_insert(0) += c;
            }
            let mut f = factors.clone();
            f.push(bit);
            f.sort_unstable();
            *next.entry(f).or_insert(0) -= k as i64 * c;
        }
        next.retain(|_, c| *c != 0);
        terms = next;
    }
    Ok(NdExpansion {
        order: d,
        terms: terms
            .into_iter()
            .map(|(factors, coeff)| NdTerm { coeff, factors })
            .collect(),
    })
}

/// Assembles `D^d log phi(u)` from precomputed partials.
pub fn derivative_tensor_from_partials(
    partials: &CfPartials,
    expansion: &NdExpansion,
) -> Result<ComplexSymmetricTensor> {
    let d = expansion.order;
    if partials.max_order() < d {
        return Err(Error::InvalidArgument(format!(
            "partials computed to order {}, need {d}",
            partials.max_order()
        )));
    }
    let n = partials.dim();
    let entries = multisets(n, d)
        .iter()
        .map(|t| expansion.evaluate(partials, t))
        .collect();
    ComplexSymmetricTensor::from_canonical(n, d, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case() {
        let e = nd_expansion(1).unwrap();
        assert_eq!(e.terms, vec![NdTerm { coeff: 1, factors: vec![1] }]);
    }

    #[test]
    fn second_order_by_hand() {
        // N_2 = d12 phi * phi - d1 phi * d2 phi
        let e = nd_expansion(2).unwrap();
        assert_eq!(
            e.terms,
            vec![
                NdTerm { coeff: 1, factors: vec![0, 3] },
                NdTerm { coeff: -1, factors: vec![1, 2] },
            ]
        );
    }

    #[test]
    fn fourth_order_shape() {
        let e = nd_expansion(4).unwrap();
        assert_eq!(e.terms.len(), 15);
        assert_eq!(e.abs_coefficient_sum(), 1 + 7 + 2 * 6 + 6);
        assert!(e.abs_coefficient_sum() <= 48);
    }

    #[test]
    fn parts_cover_every_position_once() {
        for d in 1..=7 {
            let e = nd_expansion(d).unwrap();
            let full = (1u32 << d) - 1;
            for t in &e.terms {
                assert_eq!(t.factors.len(), d);
                assert_eq!(t.factors.iter().fold(0, |a, f| a | f), full);
                assert_eq!(t.factors.iter().map(|f| f.count_ones()).sum::<u32>(), d as u32);
            }
        }
    }

    #[test]
    fn coefficient_bound() {
        let mut fact = 1i64;
        for d in 1..=8 {
            if d > 1 {
                fact *= d as i64 - 1;
            }
            let e = nd_expansion(d).unwrap();
            assert!(e.abs_coefficient_sum() <= (1i64 << (d - 1)) * fact, "d = {d}");
        }
    }

    #[test]
    fn order_limits() {
        assert!(nd_expansion(0).is_err());
        assert!(nd_expansion(MAX_EXPANSION_ORDER + 1).is_err());
    }
}
