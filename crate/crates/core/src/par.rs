//! Data-parallel helpers. With the `parallel` feature the per-block loops run
//! on the rayon pool; without it every entry point falls back to a plain
//! sequential iterator.

use serde::{Deserialize, Serialize};

/// Work below this many scalar multiply-adds is always run sequentially.
#[cfg(feature = "parallel")]
const PAR_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

#[cfg(feature = "parallel")]
impl Exec {
    fn go_parallel(self, work: usize) -> bool {
        self == Exec::Parallel && work >= PAR_MIN_WORK
    }
}

/// Maps `f` over `items`, preserving order. `cost` is the approximate work per
/// item, used to skip thread dispatch for small jobs.
pub fn map_slice<T, R, F>(exec: Exec, items: &[T], cost: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.go_parallel(items.len().saturating_mul(cost)) {
        use rayon::prelude::*;
        return items.par_iter().with_min_len(8).map(f).collect();
    }
    let _ = (exec, cost);
    items.iter().map(f).collect()
}

/// Maps `f` over `0..len`, preserving order.
pub fn map_range<R, F>(exec: Exec, len: usize, cost: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.go_parallel(len.saturating_mul(cost)) {
        use rayon::prelude::*;
        return (0..len).into_par_iter().with_min_len(8).map(f).collect();
    }
    let _ = (exec, cost);
    (0..len).map(f).collect()
}

/// Coarse-grained task map (folds, replicates, benchmark runs). Each task is
/// assumed expensive, so no work threshold applies.
pub fn map_tasks<T, R, F>(exec: Exec, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if cfg!(feature = "parallel") && exec == Exec::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}
