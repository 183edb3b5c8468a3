//! Replica farm: independent runs with derived seeds on a shared worker pool.

use rayon::prelude::*;
use std::sync::OnceLock;

use crate::rng::{derive_seed, STREAM_DYNAMICS};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "NBBM_THREADS";

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
        {
            b = b.num_threads(k);
        }
        b.build().expect("thread pool")
    })
}

pub fn num_threads() -> usize {
    pool().current_num_threads()
}

/// Seed handed to replica `r` of a run with master seed `master`.
pub fn replica_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64, STREAM_DYNAMICS)
}

/// Run `f(replica_id, seed)` for every replica in parallel. Output order is
/// the replica order, so results do not depend on scheduling.
pub fn run_replicas<T, F>(n_replicas: usize, master: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    pool().install(|| {
        (0..n_replicas)
            .into_par_iter()
            .map(|r| f(r, replica_seed(master, r)))
            .collect()
    })
}

/// Parallel map over arbitrary work items on the shared pool.
pub fn par_map<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    pool().install(|| items.into_par_iter().map(f).collect())
}
