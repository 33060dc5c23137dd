//! Serializable summary of one estimation run.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{condition_diagnostics, match_columns, ConditionReport, MatchResult, RealMatrix};
use crate::tensor_decomp::DecompositionDiagnostics;

pub const SCHEMA_VERSION: u32 = 1;

/// One rejected attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryRecord {
    pub attempt: usize,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub requested: usize,
    pub succeeded: usize,
    pub seeds: Vec<u64>,
    /// Index of the replica used as the alignment reference.
    pub reference: usize,
    /// Per-replica max distance to the merged columns after alignment.
    pub spread: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryDiagnostics {
    /// Fourier point scale actually used.
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Fourier points of the accepted attempt, in the estimator's coordinates.
    pub fourier_points: Vec<Vec<f64>>,
    /// `|phi|` at each accepted Fourier point.
    pub cf_moduli: Vec<f64>,
    pub low_modulus: bool,
    /// Eigenvalues (re, im) of the matrix that was diagonalized.
    pub eigenvalues: Vec<(f64, f64)>,
    #[serde(with = "crate::serde_util::lossless_f64")]
    pub min_gap: f64,
    pub gap_threshold: f64,
    /// Jackknife standard error of the diagonalized matrix.
    pub noise_se: f64,
    /// Frobenius norms of the signal matrices compared against noise.
    pub signal_norms: Vec<f64>,
    pub retries: usize,
    pub retry_log: Vec<RetryRecord>,
    /// Conditioning of the true mixing matrix, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_condition: Option<ConditionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<ReplicaSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub schema_version: u32,
    pub method: String,
    pub n: usize,
    pub m: usize,
    /// Recovered unit columns, one inner list per column.
    pub columns: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchResult>,
    pub diagnostics: RecoveryDiagnostics,
    pub seed: u64,
    pub sample_count: usize,
    pub timings: Timings,
    /// Method-specific payload (for example a learned mixture model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
}

impl RecoveryReport {
    pub fn new(method: &str, columns: &RealMatrix, seed: u64, sample_count: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: method.to_string(),
            n: columns.nrows(),
            m: columns.ncols(),
            columns: matrix_to_columns(columns),
            matching: None,
            diagnostics: RecoveryDiagnostics::default(),
            seed,
            sample_count,
            timings: Timings::default(),
            model: None,
        }
    }

    pub fn columns_matrix(&self) -> RealMatrix {
        columns_to_matrix(self.n, &self.columns)
    }

    /// Fills in the match against `truth` and its Khatri-Rao conditioning at
    /// order `d`.
    pub fn attach_truth(&mut self, truth: &RealMatrix, d: usize) -> Result<()> {
        self.matching = Some(match_columns(truth, &self.columns_matrix())?);
        self.diagnostics.truth_condition = Some(condition_diagnostics(truth, d, 1e-9)?);
        Ok(())
    }

    pub fn max_error(&self) -> Option<f64> {
        self.matching.as_ref().map(|m| m.max_error)
    }

    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.timings = Timings::default();
        r
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

pub fn matrix_to_columns(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().cloned().collect()).collect()
}

pub fn columns_to_matrix(n: usize, cols: &[Vec<f64>]) -> RealMatrix {
    RealMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}
