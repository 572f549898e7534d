//! Worker pool shared by the Monte Carlo and optimizer modules.

use std::sync::OnceLock;

/// Environment variable holding the worker count (unset or `0`: all cores).
pub const THREADS_ENV: &str = "TWOPHASE_THREADS";

fn requested_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new().thread_name(|i| format!("twophase-{i}"));
        if let Some(n) = requested_threads() {
            builder = builder.num_threads(n);
        }
        builder.build().expect("thread pool")
    })
}

/// Run `f` inside the shared pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

pub fn current_threads() -> usize {
    pool().current_num_threads()
}
