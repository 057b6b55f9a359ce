//! Deterministic reductions.
//!
//! Integrals and inner products are summed over a fixed binary tree so that
//! identical inputs give bit-identical results, independent of chunk sizes
//! or thread counts.

use crate::scalar::Real;

const LEAF: usize = 64;

/// Sums `f(i)` for `i` in `lo..hi` over a fixed pairwise tree.
pub(crate) fn pairwise_sum<T, F>(lo: usize, hi: usize, f: &F) -> T
where
    T: Real,
    F: Fn(usize) -> T,
{
    let n = hi - lo;
    if n <= LEAF {
        let mut acc = T::zero();
        for i in lo..hi {
            acc += f(i);
        }
        acc
    } else {
        let mid = lo + n / 2;
        pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
    }
}

/// Pairwise sum of a slice.
pub(crate) fn pairwise_sum_slice<T: Real>(xs: &[T]) -> T {
    pairwise_sum(0, xs.len(), &|i| xs[i])
}
