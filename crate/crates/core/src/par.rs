//! Thin switch between rayon and plain iterators.
//!
//! Every helper here partitions work by fixed chunk boundaries, so results
//! never depend on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for deterministic partial reductions.
pub(crate) const REDUCE_CHUNK: usize = 4096;

pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sums `f(i)` for `i in 0..n` in fixed-size chunks; partials are added in
/// chunk order so the result is bit-identical for any thread count.
pub(crate) fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_indices(chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partials.into_iter().sum()
}

/// [`chunked_sum`] for several accumulators at once.
pub(crate) fn chunked_sums<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_indices(chunks, |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        let mut acc = [0.0; K];
        for i in lo..hi {
            for (a, x) in acc.iter_mut().zip(f(i)) {
                *a += x;
            }
        }
        acc
    });
    partials.into_iter().fold([0.0; K], |mut acc, p| {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
        acc
    })
}

/// Number of worker threads in the active pool (1 without the `parallel` feature).
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Applies `f(global_index, &mut item)` to every element.
pub(crate) fn update_indexed<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    for_each_chunk_mut(data, REDUCE_CHUNK, |c, chunk| {
        let base = c * REDUCE_CHUNK;
        for (k, item) in chunk.iter_mut().enumerate() {
            f(base + k, item);
        }
    });
}
