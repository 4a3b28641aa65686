//! Data-parallel execution helpers with a sequential fallback.
//!
//! All node loops in the crate go through the two entry points here.
//! `chunk_map_collect` evaluates a closure per fixed-size index chunk and
//! returns the per-chunk results **in chunk order**, so any reduction the
//! caller performs over the returned vector is deterministic regardless of
//! thread scheduling. `for_each_chunk_mut` is the in-place counterpart for
//! field updates.
//!
//! With the `parallel` feature the chunks run on the rayon pool; without it
//! everything is sequential. [`force_sequential`] is a runtime switch used
//! by the benchmark suite to compare both paths inside one binary.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const CHUNK: usize = 4096;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path at runtime even when compiled with rayon.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_sequential() -> bool {
    cfg!(not(feature = "parallel")) || FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

fn chunk_ranges(len: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(len)))
        .collect()
}

/// Map `f` over index chunks of `0..len`, collecting results in chunk order.
pub fn chunk_map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    let ranges = chunk_ranges(len);
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        return ranges.into_par_iter().map(|(lo, hi)| f(lo, hi)).collect();
    }
    ranges.into_iter().map(|(lo, hi)| f(lo, hi)).collect()
}

/// Apply `f` to disjoint chunks of `out`; `f` receives the chunk's start index.
pub fn for_each_chunk_mut<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    if !is_sequential() {
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| f(c * CHUNK, chunk));
        return;
    }
    out.chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| f(c * CHUNK, chunk));
}

/// Fill each `out[i]` with `f(start + i)` over disjoint chunks.
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    for_each_chunk_mut(out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = f(start + k);
        }
    });
}

/// Deterministic sum of `f(i)` over `0..len` (chunked pairwise-ish).
pub fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    chunk_map_collect(len, |lo, hi| (lo..hi).map(&f).sum::<f64>())
        .into_iter()
        .sum()
}
