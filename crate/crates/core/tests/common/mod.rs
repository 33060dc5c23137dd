//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fpca_core::charfun::SampleSet;
use fpca_core::gmm::GaussianMixtureModel;
use fpca_core::linalg::{ComplexMatrix, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Nodes and weights for `E[g(t)]`, `t ~ N(0, 1)`, by Golub-Welsch.
pub fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(k, k, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let weights = (0..k).map(|q| eig.eigenvectors[(0, q)].powi(2)).collect();
    (eig.eigenvalues.iter().cloned().collect(), weights)
}

/// `E[x^p e^{i u x}]` for `x ~ N(mu, sigma^2)`, `p = 0..=max_power`, by quadrature.
pub fn quad_moments(mu: f64, sigma: f64, u: f64, max_power: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); max_power + 1];
    for (t, w) in rule.0.iter().zip(&rule.1) {
        let x = mu + sigma * t;
        let e = C64::new(0.0, u * x).exp() * *w;
        let mut xp = 1.0;
        for slot in out.iter_mut() {
            *slot += e * xp;
            xp *= x;
        }
    }
    out
}

/// `E[prod_c x_c^{p_c} e^{i u^T x}]` for one spherical component; coordinates
/// are independent, so the integral is a product of one-dimensional ones.
fn component_moment(table: &[Vec<C64>], powers: &[usize]) -> C64 {
    table.iter().zip(powers).map(|(m, &p)| m[p]).product()
}

fn component_tables(g: &GaussianMixtureModel, u: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> Vec<Vec<Vec<C64>>> {
    (0..g.k)
        .map(|j| {
            let sd = g.variances[j].sqrt();
            (0..g.n).map(|c| quad_moments(g.means[j][c], sd, u[c], 3, rule)).collect()
        })
        .collect()
}

/// Quadrature oracle for `E[x x^T e^{i u^T x}]`.
pub fn oracle_second(g: &GaussianMixtureModel, u: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> ComplexMatrix {
    let tables = component_tables(g, u, rule);
    ComplexMatrix::from_fn(g.n, g.n, |a, b| {
        let mut p = vec![0; g.n];
        p[a] += 1;
        p[b] += 1;
        (0..g.k).map(|j| component_moment(&tables[j], &p) * g.weights[j]).sum()
    })
}

/// Quadrature oracle for `E[e^{i u^T x}]`.
pub fn oracle_cf(g: &GaussianMixtureModel, u: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> C64 {
    let tables = component_tables(g, u, rule);
    (0..g.k).map(|j| component_moment(&tables[j], &vec![0; g.n]) * g.weights[j]).sum()
}

/// Quadrature oracle for `E[x (z^T x)^2 e^{i u^T x}]`.
pub fn oracle_cubic(g: &GaussianMixtureModel, u: &[f64], z: &[f64], rule: &(Vec<f64>, Vec<f64>)) -> DVector<C64> {
    let tables = component_tables(g, u, rule);
    DVector::from_fn(g.n, |a, _| {
        let mut s = C64::new(0.0, 0.0);
        for b in 0..g.n {
            for c in 0..g.n {
                let mut p = vec![0; g.n];
                p[a] += 1;
                p[b] += 1;
                p[c] += 1;
                let m: C64 = (0..g.k).map(|j| component_moment(&tables[j], &p) * g.weights[j]).sum();
                s += m * (z[b] * z[c]);
            }
        }
        s
    })
}

/// `(1/N) sum_r prod_{a in idx} (i x_a) e^{i u^T x}`, the empirical partial
/// of the characteristic function, summed directly.
pub fn direct_partial(s: &SampleSet, u: &[f64], idx: &[usize]) -> C64 {
    let i = C64::new(0.0, 1.0);
    let mut acc = C64::new(0.0, 0.0);
    for row in s.rows() {
        let t: f64 = row.iter().zip(u).map(|(x, w)| x * w).sum();
        let mut term = C64::new(0.0, t).exp();
        for &a in idx {
            term *= i * row[a];
        }
        acc += term;
    }
    acc / s.len() as f64
}

/// Fourth derivative of `log phi` from the fifteen-term expansion
/// `f_{abcd}/f - sum_4 f_{abc} f_d/f^2 - sum_3 f_{ab} f_{cd}/f^2
///  + 2 sum_6 f_{ab} f_c f_d/f^3 - 6 f_a f_b f_c f_d/f^4`.
pub fn explicit_fourth(s: &SampleSet, u: &[f64], idx: [usize; 4]) -> C64 {
    let f = |i: &[usize]| direct_partial(s, u, i);
    let [a, b, c, d] = idx;
    let phi = f(&[]);
    let (fa, fb, fc, fd) = (f(&[a]), f(&[b]), f(&[c]), f(&[d]));
    let (fab, fac, fad, fbc, fbd, fcd) = (f(&[a, b]), f(&[a, c]), f(&[a, d]), f(&[b, c]), f(&[b, d]), f(&[c, d]));
    let (fabc, fabd, facd, fbcd) = (f(&[a, b, c]), f(&[a, b, d]), f(&[a, c, d]), f(&[b, c, d]));
    let fabcd = f(&[a, b, c, d]);
    fabcd / phi
        - (fabc * fd + fabd * fc + facd * fb + fbcd * fa) / phi.powu(2)
        - (fab * fcd + fac * fbd + fad * fbc) / phi.powu(2)
        + (fab * fc * fd + fac * fb * fd + fad * fb * fc + fbc * fa * fd + fbd * fa * fc + fcd * fa * fb) * 2.0
            / phi.powu(3)
        - fa * fb * fc * fd * 6.0 / phi.powu(4)
}

/// `D^2 log phi` from its three-term expansion.
pub fn explicit_second(s: &SampleSet, u: &[f64], a: usize, b: usize) -> C64 {
    let f = |i: &[usize]| direct_partial(s, u, i);
    let phi = f(&[]);
    f(&[a, b]) / phi - f(&[a]) * f(&[b]) / phi.powu(2)
}

/// Sample covariance with the `1/N` normalization, summed directly.
pub fn direct_covariance(s: &SampleSet) -> DMatrix<f64> {
    let n = s.dim();
    let count = s.len() as f64;
    let mut mean = vec![0.0; n];
    for row in s.rows() {
        for a in 0..n {
            mean[a] += row[a] / count;
        }
    }
    DMatrix::from_fn(n, n, |a, b| s.rows().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / count)
}
