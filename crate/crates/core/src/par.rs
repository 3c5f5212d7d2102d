//! Indexed map over replications, parallel when the `parallel` feature is on.
//!
//! Results are always returned in index order, so callers see the same output
//! regardless of worker count or completion order.

/// Applies `f` to `0..len` using up to `workers` threads.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(workers: usize, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;

    if workers <= 1 || len <= 1 {
        return (0..len).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("could not build a {workers}-thread pool ({e}); running sequentially");
            (0..len).map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(_workers: usize, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..len).map(f).collect()
}

/// Number of hardware threads available to the process.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
