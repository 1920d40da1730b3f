//! Execution helpers: data-parallel map/reduce with a sequential fallback.
//!
//! With the `parallel` feature enabled (the default) the `*_map` helpers run
//! on the rayon thread pool; without it they degrade to plain iterators with
//! identical results. The `seq_*` variants are always sequential and exist so
//! benchmarks can compare both paths in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `items` to a vector, in parallel when the `parallel` feature is on.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential counterpart of [`par_map`].
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Runs `f` over disjoint equally sized chunks of `data`, in parallel when
/// the `parallel` feature is on. `chunk_len` must divide `data.len()`.
///
/// Each chunk is processed independently, so the result is bit-identical to
/// the sequential run regardless of scheduling.
pub fn par_chunks_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert!(chunk_len > 0 && data.len() % chunk_len == 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
    }
}

/// Always-sequential counterpart of [`par_chunks_mut`].
pub fn seq_chunks_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    debug_assert!(chunk_len > 0 && data.len() % chunk_len == 0);
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, chunk)| f(i, chunk));
}
