use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use super::{asymmetry, ComplexMatrix, RealMatrix, C64};
use crate::error::{Error, Result};

/// Eigenpairs of a square complex matrix, with per-pair residuals.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Unit-norm eigenvectors as columns.
    pub vectors: ComplexMatrix,
    /// `||M v - lambda v||_2` per pair.
    pub residuals: Vec<f64>,
    /// Minimum pairwise distance between eigenvalues (infinite for a single value).
    pub min_gap: f64,
    /// Bound satisfied by every entry of `residuals`.
    pub residual_bound: f64,
}

impl EigenSystem {
    fn assemble(m: &ComplexMatrix, values: Vec<C64>, vectors: ComplexMatrix, bound: Option<f64>) -> Self {
        let residuals: Vec<f64> = (0..values.len())
            .map(|k| {
                let v = vectors.column(k);
                (m * v - v * values[k]).norm()
            })
            .collect();
        let max_res = residuals.iter().cloned().fold(0.0, f64::max);
        Self {
            min_gap: min_pairwise_gap(&values),
            values,
            vectors,
            residual_bound: bound.unwrap_or(max_res),
            residuals,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

pub(crate) fn min_pairwise_gap(values: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Dense nonsymmetric eigendecomposition through the complex Schur form.
///
/// Eigenvectors are obtained by back substitution on the triangular factor.
/// The call fails when a residual exceeds `tol` or when the eigenvector matrix
/// is numerically singular (smallest singular value `<= tol`), which is how a
/// defective matrix shows up in floating point.
pub fn general_eig(m: &ComplexMatrix, tol: f64) -> Result<EigenSystem> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("eig of {}x{} matrix", n, m.ncols())));
    }
    if n == 0 {
        return Ok(EigenSystem {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
            residuals: vec![],
            min_gap: f64::INFINITY,
            residual_bound: tol,
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::NonDiagonalizable {
            tol,
            max_residual: f64::INFINITY,
            vector_sigma_min: 0.0,
            residuals: vec![],
        }
    })?;
    let (q, t) = schur.unpack();
    let norm = t.norm().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * norm).max(f64::MIN_POSITIVE * 1e3);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (t[(a, a)], t[(b, b)]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (slot, &k) in order.iter().enumerate() {
        let lambda = t[(k, k)];
        let mut y = DVector::<C64>::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - lambda;
            if den.norm() < smin {
                den = C64::new(smin, 0.0);
            }
            y[j] = -s / den;
            // rescale to avoid overflow on near-defective inputs
            let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                y /= C64::new(big, 0.0);
            }
        }
        let mut v = &q * y;
        let nv = v.norm();
        v /= C64::new(nv, 0.0);
        vectors.set_column(slot, &v);
        values.push(lambda);
    }

    let sys = EigenSystem::assemble(m, values, vectors, Some(tol));
    let sigma_min = sys
        .vectors
        .clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max_residual = sys.max_residual();
    if max_residual > tol || !(sigma_min > tol) {
        return Err(Error::NonDiagonalizable {
            tol,
            max_residual,
            vector_sigma_min: sigma_min,
            residuals: sys.residuals,
        });
    }
    Ok(sys)
}

/// Default block separation: a quarter of the mean spacing of the real
/// spectrum.
pub fn default_block_gap(real_eigs: &[f64]) -> f64 {
    let n = real_eigs.len().max(1);
    let lo = real_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = real_eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (hi - lo) / (4.0 * n as f64)
    } else {
        0.0
    }
}

/// Eigendecomposition of a complex symmetric `Sigma = R + iI` whose
/// eigenvectors are real: diagonalize `R`, split its spectrum into blocks at
/// gaps of at least `eps0`, then diagonalize `U^T I U` inside each block.
///
/// Eigenvalues are read back as `v^T Sigma v`. Vectors are real (zero
/// imaginary part), ordered by block (decreasing real part) and, within a
/// block, by decreasing imaginary part.
pub fn complex_symmetric_eig_blocked(
    sigma: &ComplexMatrix,
    eps0: f64,
    sym_tol: f64,
) -> Result<EigenSystem> {
    let n = sigma.nrows();
    if n != sigma.ncols() {
        return Err(Error::Shape(format!("{}x{} is not square", n, sigma.ncols())));
    }
    let asym = asymmetry(sigma);
    if asym > sym_tol {
        return Err(Error::NotSymmetric(asym));
    }
    let re: RealMatrix = sigma.map(|z| z.re);
    let im: RealMatrix = sigma.map(|z| z.im);
    let re = (&re + re.transpose()) * 0.5;
    let im = (&im + im.transpose()) * 0.5;

    let (r_vals, r_vecs) = sorted_symmetric_eigen(&re);
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || r_vals[i - 1] - r_vals[i] >= eps0 {
            blocks.push((start, i));
            start = i;
        }
    }

    let mut real_vecs = RealMatrix::zeros(n, n);
    let mut col = 0;
    for (s, e) in blocks {
        let u = r_vecs.columns(s, e - s).into_owned();
        if e - s == 1 {
            real_vecs.set_column(col, &u.column(0));
            col += 1;
            continue;
        }
        let inner = u.transpose() * &im * &u;
        let inner = (&inner + inner.transpose()) * 0.5;
        let (_, w) = sorted_symmetric_eigen(&inner);
        let v = &u * w;
        for j in 0..v.ncols() {
            real_vecs.set_column(col, &v.column(j));
            col += 1;
        }
    }

    let vectors = real_vecs.map(|x| C64::new(x, 0.0));
    let values = (0..n)
        .map(|k| {
            let v = vectors.column(k);
            (v.transpose() * sigma * v)[(0, 0)]
        })
        .collect();
    Ok(EigenSystem::assemble(sigma, values, vectors, None))
}

/// Symmetric eigendecomposition with eigenvalues in decreasing order.
pub fn sorted_symmetric_eigen(m: &RealMatrix) -> (Vec<f64>, RealMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
        let g = RealMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        g.qr().q()
    }

    #[test]
    fn diagonal_matrix() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(2.0, 0.0)]));
        let sys = general_eig(&m, 1e-9).unwrap();
        assert_eq!(sys.values, vec![c(2.0, 0.0), c(3.0, 0.0)]);
        assert_relative_eq!(sys.vectors[(1, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(sys.vectors[(0, 1)].norm(), 1.0, epsilon = 1e-12);
        assert_eq!(sys.min_gap, 1.0);
    }

    #[test]
    fn constructed_nonnormal_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ComplexMatrix::from_fn(2, 2, |i, j| {
            c(
                if i == j { 2.0 } else { 0.0 } + rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
        });
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 1.0), c(4.0, -2.0)]));
        let m = &p * d * p.clone().try_inverse().unwrap();
        let sys = general_eig(&m, 1e-9).unwrap();
        assert!((sys.values[0] - c(1.0, 1.0)).norm() < 1e-9);
        assert!((sys.values[1] - c(4.0, -2.0)).norm() < 1e-9);
        for k in 0..2 {
            let truth = p.column(k) / c(p.column(k).norm(), 0.0);
            let v = sys.vectors.column(k);
            let phase = truth.dotc(&v);
            let aligned = v / (phase / c(phase.norm(), 0.0));
            assert!((aligned - truth).norm() < 1e-8);
        }
    }

    #[test]
    fn jordan_block_signals() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        match general_eig(&m, 1e-9) {
            Err(Error::NonDiagonalizable { residuals, .. }) => assert_eq!(residuals.len(), 2),
            other => panic!("expected non-diagonalizable, got {other:?}"),
        }
    }

    #[test]
    fn blocked_diagonal() {
        let s = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 2.0), c(5.0, 0.0)]));
        let sys = complex_symmetric_eig_blocked(&s, 1.0, 1e-9).unwrap();
        assert_eq!(sys.values, vec![c(5.0, 0.0), c(1.0, 2.0)]);
        assert_relative_eq!(sys.vectors[(1, 0)].re.abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(sys.vectors[(0, 1)].re.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn blocked_degenerate_real_part_split_by_imaginary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_orthogonal(2, &mut rng);
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 2.0), c(1.0, 7.0)]));
        let qc = to_complex(&q);
        let s = &qc * d * qc.transpose();
        let sys = complex_symmetric_eig_blocked(&s, 1.0, 1e-9).unwrap();
        // descending imaginary part inside the block
        let expect = [(1usize, c(1.0, 7.0)), (0usize, c(1.0, 2.0))];
        for (slot, (col, val)) in expect.iter().enumerate() {
            assert!((sys.values[slot] - val).norm() < 1e-8);
            let v = sys.vectors.column(slot).map(|z| z.re);
            let t = q.column(*col);
            let err = (&v - t).norm().min((&v + t).norm());
            assert!(err < 1e-8, "column {col} error {err}");
        }
    }

    #[test]
    fn blocked_real_symmetric_reduces_to_ordinary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = random_orthogonal(4, &mut rng);
        let d = RealMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 3.0, 1.5, -1.0]));
        let s = to_complex(&(&q * d * q.transpose()));
        let sys = complex_symmetric_eig_blocked(&s, 0.1, 1e-9).unwrap();
        for (v, e) in sys.values.iter().zip([4.0, 3.0, 1.5, -1.0]) {
            assert!((v - c(e, 0.0)).norm() < 1e-10);
        }
        assert!(sys.max_residual() < 1e-10);
    }

    #[test]
    fn blocked_rejects_asymmetric() {
        let s = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(
            complex_symmetric_eig_blocked(&s, 0.1, 1e-9),
            Err(Error::NotSymmetric(_))
        ));
    }
}
