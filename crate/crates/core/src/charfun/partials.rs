use rayon::prelude::*;

use super::SampleSet;
use crate::error::{Error, Result};
use crate::linalg::multiset::{multiset_rank, MultisetLadder};
use crate::linalg::C64;

/// Rows per accumulation chunk. Results are bit-reproducible for a fixed
/// chunk size regardless of the thread count.
pub const CHUNK_ROWS: usize = 512;

/// `i^s` for `s = 0..4`.
fn i_pow(s: usize) -> C64 {
    match s % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// `(1/N) sum_j e^{i u^T x_j}`.
pub fn empirical_cf(samples: &SampleSet, u: &[f64]) -> C64 {
    assert_eq!(u.len(), samples.dim(), "Fourier point dimension");
    let mut acc = C64::new(0.0, 0.0);
    for r in samples.rows() {
        let t: f64 = r.iter().zip(u).map(|(x, w)| x * w).sum();
        acc += C64::new(t.cos(), t.sin());
    }
    acc / samples.len() as f64
}

/// `(1/N) sum_j i^{|S|} (prod_{a in S} x_a) e^{i u^T x_j}` for a multiset `S`
/// of coordinates (repeats allowed, any order).
pub fn cf_partial(samples: &SampleSet, u: &[f64], idx: &[usize]) -> C64 {
    assert_eq!(u.len(), samples.dim(), "Fourier point dimension");
    let mut acc = C64::new(0.0, 0.0);
    for r in samples.rows() {
        let t: f64 = r.iter().zip(u).map(|(x, w)| x * w).sum();
        let mono: f64 = idx.iter().map(|&a| r[a]).product();
        acc += C64::new(t.cos(), t.sin()) * mono;
    }
    acc * i_pow(idx.len()) / samples.len() as f64
}

/// Every partial derivative `d_S phi(u)` with `|S| <= max_order`, evaluated in
/// one pass, together with per-fold sums for leave-one-fold-out resampling.
#[derive(Debug, Clone)]
pub struct CfPartials {
    dim: usize,
    max_order: usize,
    offsets: Vec<usize>,
    point: Vec<f64>,
    /// Normalized partials, concatenated by order, multisets in rank order.
    values: Vec<C64>,
    count: usize,
    /// Unnormalized sums per fold (empty when only one fold was requested).
    fold_sums: Vec<Vec<C64>>,
    fold_counts: Vec<usize>,
}

impl CfPartials {
    /// Streams over the samples once. Chunk `c` of [`CHUNK_ROWS`] rows goes to
    /// fold `c % folds`.
    pub fn compute(samples: &SampleSet, u: &[f64], max_order: usize, folds: usize) -> Result<Self> {
        if u.len() != samples.dim() {
            return Err(Error::Shape(format!(
                "Fourier point has dimension {}, samples have {}",
                u.len(),
                samples.dim()
            )));
        }
        let folds = folds.max(1);
        let n = samples.dim();
        let ladder = MultisetLadder::new(n, max_order);
        let offsets = ladder.offsets();
        let total = ladder.total();
        let rows = samples.len();
        let n_chunks = rows.div_ceil(CHUNK_ROWS);

        let chunk_sum = |c: usize| -> Vec<C64> {
            let mut sums = vec![C64::new(0.0, 0.0); total];
            let mut mono = vec![0.0f64; total];
            let end = ((c + 1) * CHUNK_ROWS).min(rows);
            for j in c * CHUNK_ROWS..end {
                let x = samples.row(j);
                mono[0] = 1.0;
                for s in 1..=max_order {
                    let (lo, hi) = mono.split_at_mut(offsets[s]);
                    let prev = &lo[offsets[s - 1]..];
                    for (slot, &(parent, last)) in hi.iter_mut().zip(&ladder.parents[s]) {
                        *slot = prev[parent] * x[last];
                    }
                }
                let t: f64 = x.iter().zip(u).map(|(a, w)| a * w).sum();
                let (sin, cos) = t.sin_cos();
                for (acc, &m) in sums.iter_mut().zip(&mono) {
                    acc.re += m * cos;
                    acc.im += m * sin;
                }
            }
            sums
        };

        let mut fold_sums = vec![vec![C64::new(0.0, 0.0); total]; folds];
        let mut fold_counts = vec![0usize; folds];
        // bounded batches keep memory flat while the in-order merge stays deterministic
        let batch = (rayon::current_num_threads() * 4).max(1);
        let mut start = 0;
        while start < n_chunks {
            let end = (start + batch).min(n_chunks);
            let parts: Vec<Vec<C64>> = (start..end).into_par_iter().map(chunk_sum).collect();
            for (off, part) in parts.into_iter().enumerate() {
                let c = start + off;
                let f = c % folds;
                for (acc, v) in fold_sums[f].iter_mut().zip(part) {
                    *acc += v;
                }
                fold_counts[f] += ((c + 1) * CHUNK_ROWS).min(rows) - c * CHUNK_ROWS;
            }
            start = end;
        }

        let mut sums = vec![C64::new(0.0, 0.0); total];
        for fs in &fold_sums {
            for (acc, v) in sums.iter_mut().zip(fs) {
                *acc += v;
            }
        }
        let values = Self::normalize(&sums, rows, &offsets, max_order);
        if folds == 1 {
            fold_sums.clear();
            fold_counts.clear();
        }
        Ok(Self {
            dim: n,
            max_order,
            offsets,
            point: u.to_vec(),
            values,
            count: rows,
            fold_sums,
            fold_counts,
        })
    }

    fn normalize(sums: &[C64], count: usize, offsets: &[usize], max_order: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(sums.len());
        for s in 0..=max_order {
            let hi = if s == max_order { sums.len() } else { offsets[s + 1] };
            let f = i_pow(s) / count as f64;
            out.extend(sums[offsets[s]..hi].iter().map(|v| v * f));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn sample_count(&self) -> usize {
        self.count
    }

    /// `phi(u)`.
    pub fn cf(&self) -> C64 {
        self.values[0]
    }

    /// Partial for a sorted multiset of coordinates.
    pub fn get_sorted(&self, sorted: &[usize]) -> C64 {
        self.values[self.offsets[sorted.len()] + multiset_rank(self.dim, sorted)]
    }

    /// Partial for an arbitrary index list.
    pub fn get(&self, idx: &[usize]) -> C64 {
        let mut s = idx.to_vec();
        s.sort_unstable();
        self.get_sorted(&s)
    }

    pub fn folds(&self) -> usize {
        self.fold_counts.len()
    }

    /// Partials recomputed with fold `k` left out.
    pub fn leave_one_out(&self, k: usize) -> Option<Self> {
        if k >= self.fold_counts.len() {
            return None;
        }
        let count = self.count - self.fold_counts[k];
        if count == 0 {
            return None;
        }
        let mut sums = vec![C64::new(0.0, 0.0); self.values.len()];
        for (f, fs) in self.fold_sums.iter().enumerate() {
            if f == k {
                continue;
            }
            for (acc, v) in sums.iter_mut().zip(fs) {
                *acc += v;
            }
        }
        Some(Self {
            dim: self.dim,
            max_order: self.max_order,
            offsets: self.offsets.clone(),
            point: self.point.clone(),
            values: Self::normalize(&sums, count, &self.offsets, self.max_order),
            count,
            fold_sums: Vec::new(),
            fold_counts: Vec::new(),
        })
    }

    /// All leave-one-fold-out replicates (empty without folds).
    pub fn jackknife_replicates(&self) -> Vec<Self> {
        (0..self.folds()).filter_map(|k| self.leave_one_out(k)).collect()
    }
}

/// Jackknife standard error from leave-one-out replicate estimates, using the
/// Euclidean distance `dist` between estimates.
pub fn jackknife_se<T>(replicates: &[T], mean_of: impl Fn(&[T]) -> T, dist: impl Fn(&T, &T) -> f64) -> f64 {
    let k = replicates.len();
    if k < 2 {
        return 0.0;
    }
    let centre = mean_of(replicates);
    let ss: f64 = replicates.iter().map(|r| dist(r, &centre).powi(2)).sum();
    ((k as f64 - 1.0) / k as f64 * ss).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::multiset::multisets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, rows: usize, seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SampleSet::new(n, (0..n * rows).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    #[test]
    fn cf_examples() {
        let zeros = SampleSet::new(2, vec![0.0; 6]).unwrap();
        assert_eq!(empirical_cf(&zeros, &[0.3, -2.0]), C64::new(1.0, 0.0));
        let s = random_samples(3, 50, 1);
        assert_eq!(empirical_cf(&s, &[0.0; 3]), C64::new(1.0, 0.0));
        let pm = SampleSet::new(1, vec![1.0, -1.0]).unwrap();
        let v = empirical_cf(&pm, &[std::f64::consts::PI]);
        assert!((v - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn partial_examples() {
        let s = random_samples(3, 40, 2);
        let mean = s.mean();
        let p1 = cf_partial(&s, &[0.0; 3], &[1]);
        assert!((p1 - C64::new(0.0, mean[1])).norm() < 1e-14);
        let u = [0.4, -0.1, 0.7];
        assert_eq!(cf_partial(&s, &u, &[]), empirical_cf(&s, &u));
        let c = s.centered();
        let p2 = cf_partial(&c, &[0.0; 3], &[0, 2]);
        assert!((p2 + C64::new(c.covariance()[(0, 2)], 0.0)).norm() < 1e-14);
    }

    #[test]
    fn streamed_partials_match_direct_sums() {
        let s = random_samples(3, 1300, 3);
        let u = [0.5, 0.2, -0.3];
        let p = CfPartials::compute(&s, &u, 4, 3).unwrap();
        for d in 0..=4 {
            for t in multisets(3, d) {
                let direct = cf_partial(&s, &u, &t);
                assert!((p.get_sorted(&t) - direct).norm() < 1e-12, "{t:?}");
            }
        }
        assert_eq!(p.folds(), 3);
        let loo = p.leave_one_out(0).unwrap();
        // three chunks over three folds: fold 0 is the first 512 rows
        assert_eq!(loo.sample_count(), 1300 - 512);
        let rest = s.slice(512, 1300).unwrap();
        assert!((loo.get(&[2, 0]) - cf_partial(&rest, &u, &[0, 2])).norm() < 1e-12);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let s = random_samples(4, 5000, 4);
        let u = [0.1, 0.2, 0.3, 0.4];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| CfPartials::compute(&s, &u, 3, 2).unwrap());
        let b = four.install(|| CfPartials::compute(&s, &u, 3, 2).unwrap());
        assert_eq!(a.values, b.values);
    }
}
