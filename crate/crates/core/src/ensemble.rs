//! Deterministic parallel ensembles.

use rayon::prelude::*;

use crate::rng::derive_seed;

/// Runs `f(index, member_seed)` for every member in parallel and returns the
/// results in member order, so reductions do not depend on the thread count.
pub fn map<T, F>(runs: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..runs).into_par_iter().map(|i| f(i, derive_seed(master_seed, i as u64))).collect()
}

/// Fallible variant of [`map`]; the first error in member order wins.
pub fn try_map<T, E, F>(runs: usize, master_seed: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, u64) -> Result<T, E> + Sync + Send,
{
    map(runs, master_seed, f).into_iter().collect()
}
