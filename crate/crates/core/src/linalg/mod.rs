//! Dense complex linear algebra and symmetric tensor plumbing.

mod conditioning;
mod eig;
mod matching;
pub mod multiset;
mod tensor;

use nalgebra::DMatrix;

pub use conditioning::{condition_diagnostics, ConditionReport};
pub use eig::{
    complex_symmetric_eig_blocked, default_block_gap, general_eig, sorted_symmetric_eigen, EigenSystem,
};
pub use matching::{hungarian, match_columns, MatchResult};
pub use tensor::{
    canonical_rank, khatri_rao_power, kronecker_power, multilinear_power, subsets_lex,
    ComplexSymmetricTensor,
};

pub type C64 = nalgebra::Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type RealMatrix = DMatrix<f64>;

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|z| z.re)
}

pub fn imag_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|z| z.im)
}

/// Scales every column to unit Euclidean norm; zero columns are left alone.
pub fn normalize_columns(m: &RealMatrix) -> RealMatrix {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    out
}

/// Max modulus of `M - M^T` relative to `max(1, max |M|)`.
pub fn asymmetry(m: &ComplexMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst / scale
}
