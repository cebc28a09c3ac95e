//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it the same closures run in a plain loop. Both paths split work
//! into the same fixed-size chunks and hand results back in chunk order, so
//! anything built on top (sampling, counting, grid minima) is bit-identical
//! whichever path is compiled in and however many threads the pool has.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of draws generated from one random substream.
pub const CHUNK: usize = 1 << 14;

fn chunk_ranges(n: usize) -> impl Iterator<Item = (usize, Range<usize>)> {
    (0..n.div_ceil(CHUNK)).map(move |c| (c, c * CHUNK..((c + 1) * CHUNK).min(n)))
}

/// Maps `f` over the `CHUNK`-sized pieces of `0..n`, returning per-chunk
/// results in chunk order.
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let ranges: Vec<_> = chunk_ranges(n).collect();
        ranges.into_par_iter().map(|(c, r)| f(c, r)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunk_ranges(n).map(|(c, r)| f(c, r)).collect()
    }
}

/// Maps `f` over `0..n`, preserving index order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Counts indices in `0..n` satisfying `pred`.
pub fn count<F>(n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    map_chunks(n, |_, r| r.filter(|&i| pred(i)).count()).into_iter().sum()
}

/// Sums `f(i)` over `0..n`. Partial sums are combined in chunk order.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(n, |_, r| r.map(&f).sum::<f64>()).into_iter().sum()
}

/// Sorts ascending under IEEE total order.
pub fn sort(values: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values.par_sort_unstable_by(f64::total_cmp);
    }
    #[cfg(not(feature = "parallel"))]
    values.sort_unstable_by(f64::total_cmp);
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed; used to give independent streams to each role
/// (demand draws, capacity-factor draws, verification, ...).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Counter-based substream `index` of the generator keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
