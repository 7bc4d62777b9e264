//! Thread-pool sizing. `SPDE_THREADS` caps the worker count; the default is
//! the hardware concurrency.

/// Environment variable read by [`configured_threads`].
pub const THREADS_ENV: &str = "SPDE_THREADS";

pub fn configured_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` inside a pool of [`configured_threads`] workers.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(configured_threads()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
