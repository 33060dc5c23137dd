use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{match_columns, RealMatrix};
use crate::report::{matrix_to_columns, RecoveryReport, ReplicaSummary};

/// Seed of replica `r`; replica 0 keeps the base seed.
pub fn replica_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        return seed;
    }
    // splitmix64 finalizer over the offset seed
    let mut z = seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median-of-replicas merge. The reference is the replica with the smallest
/// total matching cost to all others; every replica is aligned to it by
/// permutation and sign, and the merged column is the entrywise median,
/// normalized. Returns the merged columns, the reference index and each
/// replica's max distance to the merge.
pub fn merge_replicas(reps: &[RealMatrix]) -> Result<(RealMatrix, usize, Vec<f64>)> {
    let first = reps.first().ok_or_else(|| Error::InvalidArgument("no replicas to merge".into()))?;
    let (n, m) = first.shape();
    if reps.iter().any(|r| r.shape() != (n, m)) {
        return Err(Error::Shape("replicas differ in shape".into()));
    }
    let mut totals = vec![0.0; reps.len()];
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            let c = match_columns(&reps[i], &reps[j])?.cost;
            totals[i] += c;
            totals[j] += c;
        }
    }
    let reference = (0..reps.len())
        .min_by(|&a, &b| totals[a].total_cmp(&totals[b]))
        .unwrap_or(0);
    let aligned: Vec<RealMatrix> = reps
        .iter()
        .map(|r| {
            let mr = match_columns(&reps[reference], r)?;
            Ok(RealMatrix::from_fn(n, m, |i, j| mr.signs[j] * r[(i, mr.permutation[j])]))
        })
        .collect::<Result<_>>()?;
    let mut merged = RealMatrix::from_fn(n, m, |i, j| median(aligned.iter().map(|a| a[(i, j)]).collect()));
    for j in 0..m {
        let c = super::normalize(merged.column(j).into_owned());
        merged.set_column(j, &c);
    }
    let spread = aligned
        .iter()
        .map(|a| {
            (0..m)
                .map(|j| (crate::linalg::normalize_columns(a).column(j) - merged.column(j)).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok((merged, reference, spread))
}

/// Runs `replicas` independent estimates concurrently (seeds from
/// [`replica_seed`]) and merges the successful ones in index order. The
/// diagnostics of the reference replica are kept. When every replica fails,
/// the first failure is returned.
pub fn run_replicas(
    replicas: usize,
    seed: u64,
    truth: Option<(&RealMatrix, usize)>,
    run: impl Fn(u64) -> Result<RecoveryReport> + Sync,
) -> Result<RecoveryReport> {
    if replicas <= 1 {
        return run(seed);
    }
    let seeds: Vec<u64> = (0..replicas).map(|r| replica_seed(seed, r)).collect();
    let results: Vec<Result<RecoveryReport>> = seeds.par_iter().map(|&s| run(s)).collect();
    let mut ok = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rep) => ok.push(rep),
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::InvalidArgument("no replicas ran".into())));
    }
    let mats: Vec<RealMatrix> = ok.iter().map(|r| r.columns_matrix()).collect();
    let (merged, reference, spread) = merge_replicas(&mats)?;
    let mut report = ok.swap_remove(reference);
    report.columns = matrix_to_columns(&merged);
    report.seed = seed;
    report.diagnostics.replicas = Some(ReplicaSummary {
        requested: replicas,
        succeeded: mats.len(),
        seeds,
        reference,
        spread,
    });
    report.matching = None;
    if let Some((a, d)) = truth {
        report.attach_truth(a, d)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_merge_rejects_outlier() {
        let good = RealMatrix::identity(2, 2);
        let flipped = RealMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let bad = crate::linalg::normalize_columns(&RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]));
        let (merged, reference, spread) = merge_replicas(&[good.clone(), flipped, bad]).unwrap();
        assert!(reference < 2);
        let r = match_columns(&good, &merged).unwrap();
        assert!(r.max_error < 1e-12, "{merged}");
        assert!(spread[2] > 0.5);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..5).map(|r| replica_seed(42, r)).collect();
        assert_eq!(s[0], 42);
        let mut d = s.clone();
        d.dedup();
        assert_eq!(d.len(), 5);
        assert_eq!(replica_seed(42, 3), s[3]);
    }
}
