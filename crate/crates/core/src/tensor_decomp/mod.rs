//! Decomposition of a pair of symmetric tensors that share rank-1 components.

mod diagonalize;
mod recover;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::multiset::{multiset_count, multiset_rank, multisets};
use crate::linalg::{ComplexSymmetricTensor, RealMatrix, C64};

pub use diagonalize::{
    diagonalize, restricted_product, subspace_basis, Diagonalization, SubspaceBasis,
};
pub use recover::{
    canonical_sign, columns_from_diagonalization, decomposition_diagnostics, estimate_rank,
    phase_correct, rank1_root, tensor_decompose, DecomposeOptions, DecompositionDiagnostics,
    RankSpec, RootDiagnostics, NEAR_TIE_RATIO,
};

/// `T_mu = sum_i mu_i A_i^{(x) d}` and `T_lambda = sum_i lambda_i A_i^{(x) d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorPair {
    pub mu: ComplexSymmetricTensor,
    pub lambda: ComplexSymmetricTensor,
    pub rank: Option<usize>,
}

impl TensorPair {
    pub fn new(mu: ComplexSymmetricTensor, lambda: ComplexSymmetricTensor, rank: Option<usize>) -> Result<Self> {
        let p = Self { mu, lambda, rank };
        p.validate()?;
        Ok(p)
    }

    /// Exact pair built from components `a` (n x m) and weights.
    pub fn from_components(a: &RealMatrix, mu: &[C64], lambda: &[C64], order: usize) -> Result<Self> {
        Self::new(
            ComplexSymmetricTensor::from_rank_one_sum(a, mu, order)?,
            ComplexSymmetricTensor::from_rank_one_sum(a, lambda, order)?,
            Some(a.ncols()),
        )
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn order(&self) -> usize {
        self.mu.order()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.dim() != self.lambda.dim() || self.mu.order() != self.lambda.order() {
            return Err(Error::Shape("tensor pair shapes differ".into()));
        }
        let d = self.mu.order();
        if d == 0 || !d.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("tensor order {d} must be even")));
        }
        if let Some(m) = self.rank {
            let bound = multiset_count(self.mu.dim(), d / 2);
            if m == 0 || m > bound {
                return Err(Error::InvalidArgument(format!("rank {m} outside 1..={bound}")));
            }
        }
        Ok(())
    }
}

/// One listed tensor entry: index tuple, real part, imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTriple(pub Vec<usize>, pub f64, pub f64);

/// File representation of a tensor pair. Only canonical multisets are listed;
/// any ordering of an index tuple names the same entry, and unlisted entries
/// are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorPairFile {
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub entries_mu: Vec<EntryTriple>,
    pub entries_lambda: Vec<EntryTriple>,
    /// Optional ground-truth components, one inner list per column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<Vec<f64>>>,
}

fn tensor_from_entries(n: usize, d: usize, entries: &[EntryTriple], which: &str) -> Result<ComplexSymmetricTensor> {
    let mut t = ComplexSymmetricTensor::zeros(n, d);
    let mut seen = vec![false; multiset_count(n, d)];
    for EntryTriple(idx, re, im) in entries {
        if idx.len() != d || idx.iter().any(|&i| i >= n) {
            return Err(Error::Parse(format!("{which}: index {idx:?} invalid for n={n}, d={d}")));
        }
        let mut s = idx.clone();
        s.sort_unstable();
        let r = multiset_rank(n, &s);
        if seen[r] {
            return Err(Error::Parse(format!("{which}: entry {s:?} listed twice")));
        }
        seen[r] = true;
        t.canonical_entries_mut()[r] = C64::new(*re, *im);
    }
    Ok(t)
}

fn entries_from_tensor(t: &ComplexSymmetricTensor) -> Vec<EntryTriple> {
    multisets(t.dim(), t.order())
        .into_iter()
        .zip(t.canonical_entries())
        .map(|(idx, z)| EntryTriple(idx, z.re, z.im))
        .collect()
}

impl TensorPairFile {
    pub fn to_pair(&self) -> Result<(TensorPair, Option<RealMatrix>)> {
        let mu = tensor_from_entries(self.n, self.d, &self.entries_mu, "entries_mu")?;
        let lambda = tensor_from_entries(self.n, self.d, &self.entries_lambda, "entries_lambda")?;
        let pair = TensorPair::new(mu, lambda, self.m)?;
        let truth = match &self.truth {
            None => None,
            Some(cols) => {
                if cols.iter().any(|c| c.len() != self.n) {
                    return Err(Error::Parse("truth columns must have length n".into()));
                }
                Some(RealMatrix::from_fn(self.n, cols.len(), |i, j| cols[j][i]))
            }
        };
        Ok((pair, truth))
    }

    pub fn from_pair(pair: &TensorPair, truth: Option<&RealMatrix>) -> Self {
        Self {
            n: pair.dim(),
            d: pair.order(),
            m: pair.rank,
            entries_mu: entries_from_tensor(&pair.mu),
            entries_lambda: entries_from_tensor(&pair.lambda),
            truth: truth.map(|t| t.column_iter().map(|c| c.iter().cloned().collect()).collect()),
        }
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
