//! Element-parallel helpers. `RESPOTOPT_THREADS` caps the worker count.

use rayon::prelude::*;
use std::sync::OnceLock;

pub const THREADS_ENV: &str = "RESPOTOPT_THREADS";

static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();

fn pool() -> Option<&'static rayon::ThreadPool> {
    POOL.get_or_init(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()?
            .trim()
            .parse::<usize>()
            .ok()?;
        if n == 0 {
            return None;
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
    })
    .as_ref()
}

/// Maps `f` over `0..n` in parallel, preserving order. Results are
/// independent of the thread count since no reduction happens here.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let run = || (0..n).into_par_iter().with_min_len(512).map(&f).collect();
    match pool() {
        Some(p) => p.install(run),
        None => run(),
    }
}
