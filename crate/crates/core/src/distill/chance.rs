//! Chance-level MSE: the mean per-coordinate squared distance between
//! two distinct teacher sentence embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::mse_value;
use crate::error::{Error, Result};
use crate::modnet::derive_seed;
use crate::par::{self, Execution};

/// Above this many unordered pairs, a seeded sample of this size is used.
pub const DEFAULT_PAIR_BUDGET: usize = 1_000_000;

const CHUNK: usize = 4096;

/// Number of unordered distinct pairs among `n` items.
pub fn pair_count(n: usize) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Map a linear index over `(0,1), (0,2), ..., (n-2,n-1)` to its pair.
pub fn unrank_pair(n: usize, k: usize) -> (usize, usize) {
    // Row i starts at i*n - i*(i+1)/2.
    let start = |i: usize| i * n - i * (i + 1) / 2;
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if start(mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, lo + 1 + (k - start(lo)))
}

/// Chance MSE over raw vectors. Exact over all pairs when their count is
/// within `pair_budget`, otherwise over `pair_budget` pairs sampled
/// uniformly without replacement.
pub fn chance_mse_vectors(vectors: &[&[f64]], pair_budget: usize, seed: u64, exec: Execution) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewRecords(n));
    }
    if pair_budget == 0 {
        return Err(Error::InvalidConfig("pair budget must be positive".into()));
    }
    let total = pair_count(n);
    if total <= pair_budget as u128 {
        let rows = par::map_range(exec, n - 1, |i| {
            (i + 1..n).map(|j| mse_value(vectors[i], vectors[j])).sum::<f64>()
        });
        return Ok(rows.iter().sum::<f64>() / total as f64);
    }
    let total = usize::try_from(total)
        .map_err(|_| Error::InvalidConfig(format!("{n} records is too many pairs to sample")))?;
    let mut rng = ChaCha8Rng::from_seed(derive_seed("chance-pairs", seed, ""));
    let mut picks = rand::seq::index::sample(&mut rng, total, pair_budget).into_vec();
    picks.sort_unstable();
    let chunks: Vec<&[usize]> = picks.chunks(CHUNK).collect();
    let sums = par::map(exec, &chunks, |chunk| {
        chunk
            .iter()
            .map(|&k| {
                let (i, j) = unrank_pair(n, k);
                mse_value(vectors[i], vectors[j])
            })
            .sum::<f64>()
    });
    Ok(sums.iter().sum::<f64>() / pair_budget as f64)
}

/// Chance MSE among the sentence vectors of `records`.
pub fn chance_mse(records: &[super::SentenceRecord], pair_budget: usize, seed: u64) -> Result<f64> {
    let vecs: Vec<&[f64]> = records.iter().map(|r| r.sentence_vector.as_slice()).collect();
    chance_mse_vectors(&vecs, pair_budget, seed, Execution::default())
}
