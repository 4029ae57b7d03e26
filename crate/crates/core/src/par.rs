//! Execution strategy for the data-parallel inner loops.
//!
//! Every reduction goes through fixed-size chunks whose partial results are
//! combined in chunk order, so sequential and parallel execution produce
//! bit-identical floating point results.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

/// How the inner loops are executed. Without the `parallel` feature,
/// `Parallel` silently runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

fn chunks(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Evaluates `f` on each chunk of `0..n` and returns the partial results in
/// chunk order.
pub fn map_chunks<T, F>(exec: Execution, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunks(n, chunk);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && ranges.len() > 1 {
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = exec;
    ranges.into_iter().map(f).collect()
}

/// Deterministic chunked sum of `f` over `0..n`.
pub fn sum_chunks<F>(exec: Execution, n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    map_chunks(exec, n, chunk, f).into_iter().sum()
}

/// Deterministic chunked sum of vector-valued partials of length `dim`.
pub fn sum_vec_chunks<F>(exec: Execution, n: usize, chunk: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>) -> Vec<f64> + Sync + Send,
{
    let mut total = vec![0.0; dim];
    for part in map_chunks(exec, n, chunk, f) {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// Applies `f` to consecutive mutable chunks of `rows` rows of width `width`.
/// `f` receives the index of the first row of its chunk.
pub fn for_each_row_chunk<T, F>(
    exec: Execution,
    data: &mut [T],
    width: usize,
    chunk_rows: usize,
    f: F,
) where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let step = width * chunk_rows.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && data.len() > step {
        data.par_chunks_mut(step)
            .enumerate()
            .for_each(|(c, block)| f(c * chunk_rows, block));
        return;
    }
    let _ = exec;
    for (c, block) in data.chunks_mut(step).enumerate() {
        f(c * chunk_rows, block);
    }
}

/// Like [`for_each_row_chunk`], walking two row-aligned buffers together:
/// `a` has rows of width `width_a`, `b` has one entry per row.
pub fn for_each_row_pair_chunk<A, B, F>(
    exec: Execution,
    a: &mut [A],
    width_a: usize,
    b: &mut [B],
    chunk_rows: usize,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    let chunk_rows = chunk_rows.max(1);
    debug_assert_eq!(a.len(), width_a * b.len());
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && b.len() > chunk_rows {
        a.par_chunks_mut(width_a * chunk_rows)
            .zip(b.par_chunks_mut(chunk_rows))
            .enumerate()
            .for_each(|(c, (ra, rb))| f(c * chunk_rows, ra, rb));
        return;
    }
    let _ = exec;
    for (c, (ra, rb)) in a
        .chunks_mut(width_a * chunk_rows)
        .zip(b.chunks_mut(chunk_rows))
        .enumerate()
    {
        f(c * chunk_rows, ra, rb);
    }
}

/// Maps `f` over a slice of independent items, preserving order.
pub fn map_items<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
