use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `N` observations in `R^n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
    /// Mean that was subtracted, when the set has been centered.
    offset: Option<Vec<f64>>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("sample dimension must be positive".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form a non-empty set of {dim}-vectors",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("samples contain non-finite values".into()));
        }
        Ok(Self {
            dim,
            data,
            offset: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows have different lengths".into()));
        }
        Self::new(dim, rows.concat())
    }

    /// Columns of `m` are the samples.
    pub fn from_columns(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.nrows(), m.as_slice().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn offset(&self) -> Option<&[f64]> {
        self.offset.as_deref()
    }

    pub fn is_centered(&self) -> bool {
        self.offset.is_some()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for r in self.rows() {
            for (a, x) in r.iter().enumerate() {
                m[a] += x;
            }
        }
        m / self.len() as f64
    }

    /// Biased (1/N) covariance about the sample mean.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for r in self.rows() {
            let v = DVector::from_iterator(self.dim, r.iter().zip(mu.iter()).map(|(x, m)| x - m));
            c.ger(1.0, &v, &v, 1.0);
        }
        c / self.len() as f64
    }

    /// Raw second moment `(1/N) sum x x^T`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for r in self.rows() {
            let v = DVector::from_column_slice(r);
            c.ger(1.0, &v, &v, 1.0);
        }
        c / self.len() as f64
    }

    /// Copy with the sample mean subtracted; the mean is kept as the offset.
    pub fn centered(&self) -> Self {
        let mu = self.mean();
        let mut data = self.data.clone();
        for r in data.chunks_exact_mut(self.dim) {
            for (x, m) in r.iter_mut().zip(mu.iter()) {
                *x -= m;
            }
        }
        let prior = self.offset.clone().unwrap_or_else(|| vec![0.0; self.dim]);
        Self {
            dim: self.dim,
            data,
            offset: Some(prior.iter().zip(mu.iter()).map(|(p, m)| p + m).collect()),
        }
    }

    /// Applies `x -> A x` to every sample.
    pub fn transform(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.ncols() != self.dim {
            return Err(Error::Shape(format!(
                "transform with {} columns applied to dimension {}",
                a.ncols(),
                self.dim
            )));
        }
        let mut data = Vec::with_capacity(self.len() * a.nrows());
        for r in self.rows() {
            let y = a * DVector::from_column_slice(r);
            data.extend(y.iter());
        }
        Self::new(a.nrows(), data)
    }

    /// Samples with indices in `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        Self::new(self.dim, self.data[start * self.dim..end * self.dim].to_vec())
    }

    /// Reads one sample per row. With `header`, the first line is skipped.
    pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(header)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let mut data = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            match dim {
                None => dim = Some(rec.len()),
                Some(d) if d != rec.len() => {
                    return Err(Error::Parse(format!(
                        "row {} has {} fields, expected {d}",
                        line + 1,
                        rec.len()
                    )))
                }
                _ => {}
            }
            for f in rec.iter() {
                data.push(f.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("row {}: cannot parse {f:?}: {e}", line + 1))
                })?);
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("no samples in input".into()))?;
        Self::new(dim, data).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv_path(path: &Path, header: bool) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, header)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        for r in self.rows() {
            w.write_record(r.iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
