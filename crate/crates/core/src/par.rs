//! Parallel/sequential dispatch for the data-parallel inner loops.
//!
//! Every loop routed through here produces its output by index, so the
//! result is identical whichever backend runs it. With the `parallel`
//! feature disabled the crate compiles without rayon and
//! [`Parallelism::default()`] is [`Parallelism::Sequential`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Backend selector for grid eigensolves, batched applies and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Parallelism::Rayon
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Parallelism::Sequential
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indices<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Fallible variant of [`map_indices`]; the reported error is the one with
/// the smallest index, so failures are deterministic too.
pub fn try_map_indices<T, F>(par: Parallelism, n: usize, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> crate::Result<T> + Send + Sync,
{
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            let results: Vec<crate::Result<T>> = (0..n).into_par_iter().map(f).collect();
            results.into_iter().collect()
        }
    }
}
