//! Index bookkeeping for symmetric tensors.
//!
//! A symmetric order-`d` tensor over `[n]` is stored once per multiset of
//! indices. Multisets are represented as non-decreasing index tuples and
//! ranked in lexicographic order, so the storage for order `d` has
//! `C(n + d - 1, d)` slots.
//!
//! Flattening uses the mixed-radix map: the tuple `(i_1, ..., i_h)` is the
//! flat index `i_1 n^{h-1} + ... + i_h` (first index most significant),
//! matching nalgebra's Kronecker product layout.

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Number of multisets of size `d` drawn from `n` values.
pub fn multiset_count(n: usize, d: usize) -> usize {
    if d == 0 {
        return 1;
    }
    if n == 0 {
        return 0;
    }
    binomial(n + d - 1, d)
}

/// Lexicographic rank of a non-decreasing tuple among all multisets of the
/// same size over `[n]`.
pub fn multiset_rank(n: usize, sorted: &[usize]) -> usize {
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let d = sorted.len();
    let mut rank = 0;
    let mut lo = 0;
    for (p, &a) in sorted.iter().enumerate() {
        let rem = d - p - 1;
        for v in lo..a {
            rank += multiset_count(n - v, rem);
        }
        lo = a;
    }
    rank
}

/// Rank of an arbitrary (unsorted) index tuple.
pub fn rank_unsorted(n: usize, idx: &[usize]) -> usize {
    let mut s = idx.to_vec();
    s.sort_unstable();
    multiset_rank(n, &s)
}

/// All non-decreasing tuples of length `d` over `[n]`, in rank order.
pub fn multisets(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(multiset_count(n, d));
    if d == 0 {
        out.push(Vec::new());
        return out;
    }
    if n == 0 {
        return out;
    }
    let mut cur = vec![0usize; d];
    loop {
        out.push(cur.clone());
        // advance to next non-decreasing tuple
        let mut p = d;
        while p > 0 && cur[p - 1] == n - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        let v = cur[p - 1] + 1;
        for c in cur.iter_mut().skip(p - 1) {
            *c = v;
        }
    }
    out
}

/// Decode a flat index into `h` base-`n` digits, most significant first.
pub fn tau_decode(mut k: usize, n: usize, h: usize) -> Vec<usize> {
    let mut out = vec![0; h];
    for slot in out.iter_mut().rev() {
        *slot = k % n;
        k /= n;
    }
    out
}

/// Inverse of [`tau_decode`].
pub fn tau_encode(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Number of distinct orderings of a multiset, `d! / prod(count!)`.
pub fn multiplicity(sorted: &[usize]) -> usize {
    let d = sorted.len();
    let mut denom: u128 = 1;
    let mut run = 1u128;
    for w in 1..d {
        if sorted[w] == sorted[w - 1] {
            run += 1;
            denom *= run;
        } else {
            run = 1;
        }
    }
    let mut num: u128 = 1;
    for i in 2..=d as u128 {
        num *= i;
    }
    (num / denom) as usize
}

/// For every multiset of size `s` (1..=max_order) the rank of its prefix
/// (size `s - 1`) and the appended last index. Used to build monomials
/// incrementally.
#[derive(Debug, Clone)]
pub struct MultisetLadder {
    pub n: usize,
    pub max_order: usize,
    /// `parents[s][r] = (rank of prefix at order s-1, last index)`.
    pub parents: Vec<Vec<(usize, usize)>>,
}

impl MultisetLadder {
    pub fn new(n: usize, max_order: usize) -> Self {
        let mut parents = vec![Vec::new()];
        for s in 1..=max_order {
            let level = multisets(n, s)
                .into_iter()
                .map(|t| (multiset_rank(n, &t[..s - 1]), t[s - 1]))
                .collect();
            parents.push(level);
        }
        Self {
            n,
            max_order,
            parents,
        }
    }

    pub fn len(&self, order: usize) -> usize {
        if order == 0 {
            1
        } else {
            self.parents[order].len()
        }
    }

    pub fn total(&self) -> usize {
        (0..=self.max_order).map(|s| self.len(s)).sum()
    }

    /// Offset of order `s` inside a concatenated per-order buffer.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        (0..=self.max_order)
            .map(|s| {
                let o = acc;
                acc += self.len(s);
                o
            })
            .collect()
    }
}
