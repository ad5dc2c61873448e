//! Trial-level data parallelism.
//!
//! `map_trials` runs on the rayon pool when the `parallel` feature is on and
//! falls back to a plain loop otherwise. Results are always returned in index
//! order, so output never depends on scheduling.

/// Sequential map over trial indices `0..n`.
pub fn map_trials_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Parallel map over trial indices `0..n`.
#[cfg(feature = "parallel")]
pub fn map_trials_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_trials_par(n, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_trials_seq(n, f)
}
