use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

/// Mixture of spherical Gaussians `sum_j w_j N(mu_j, sigma_j^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureModel {
    pub k: usize,
    pub n: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl GaussianMixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        let n = means.first().map(|m| m.len()).unwrap_or(0);
        let g = Self { k, n, weights, means, variances };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("mixture needs k >= 1 and n >= 1".into()));
        }
        if self.weights.len() != k || self.means.len() != k || self.variances.len() != k {
            return Err(Error::Shape(format!("mixture fields must all have {k} entries")));
        }
        if self.means.iter().any(|m| m.len() != self.n || m.iter().any(|v| !v.is_finite())) {
            return Err(Error::Shape(format!("every mean must have {} finite entries", self.n)));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        if self.variances.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("variances must be positive".into()));
        }
        Ok(())
    }

    /// Means as the columns of an `n x k` matrix.
    pub fn mean_matrix(&self) -> RealMatrix {
        RealMatrix::from_fn(self.n, self.k, |i, j| self.means[j][i])
    }

    pub fn mean(&self, j: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.means[j])
    }

    /// Whether the means are linearly independent (relative rank check).
    pub fn means_independent(&self, tol: f64) -> bool {
        if self.k > self.n {
            return false;
        }
        let sv = self.mean_matrix().singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let bottom = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        top > 0.0 && bottom > tol * top
    }

    /// `E[x] = sum_j w_j mu_j`.
    pub fn population_mean(&self) -> DVector<f64> {
        (0..self.k).fold(DVector::zeros(self.n), |acc, j| acc + self.mean(j) * self.weights[j])
    }

    /// `E[x x^T] = sum_j w_j sigma_j^2 I + sum_j w_j mu_j mu_j^T`.
    pub fn second_moment(&self) -> RealMatrix {
        let mut m = RealMatrix::zeros(self.n, self.n);
        for j in 0..self.k {
            let mu = self.mean(j);
            m += &mu * mu.transpose() * self.weights[j];
            for a in 0..self.n {
                m[(a, a)] += self.weights[j] * self.variances[j];
            }
        }
        m
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let g: Self = serde_json::from_reader(r)?;
        g.validate()?;
        Ok(g)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
