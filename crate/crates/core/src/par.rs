//! Deterministic parallel reductions.
//!
//! Every reduction splits the index range into fixed-size chunks, sums each
//! chunk sequentially and adds the partial sums in chunk order, so results
//! do not depend on the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..end).map(&f).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

pub(crate) fn csum_by<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..end).map(&f).sum::<Complex64>()
        })
        .collect();
    partial.iter().sum()
}

/// `Σ conj(a_i) b_i`
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    csum_by(a.len(), |i| a[i].conj() * b[i])
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    sum_by(a.len(), |i| a[i].norm_sqr())
}

/// Fills `out[i] = f(i)` in parallel.
pub(crate) fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + k);
            }
        });
}
