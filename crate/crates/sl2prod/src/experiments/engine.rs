//! Chunked parallel trial engine. The trial index space is cut into a
//! fixed number of contiguous chunks regardless of worker count; workers
//! pull chunks from a shared counter and per-chunk results are collected
//! in chunk order. Together with per-trial RNG streams this makes every
//! experiment bit-identical at any worker count.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Fixed chunk count; also the block count of jackknife resampling.
pub const CHUNKS: usize = 32;

/// Resolve a configured worker count (0 = auto).
pub fn effective_workers(configured: usize) -> usize {
    if configured > 0 {
        configured
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
    }
}

/// Split `trials` into at most [`CHUNKS`] contiguous ranges.
pub fn chunk_ranges(trials: u64) -> Vec<Range<u64>> {
    let k = CHUNKS as u64;
    (0..k)
        .map(|i| (i * trials / k)..((i + 1) * trials / k))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Run `job` over the trial chunks on `workers` threads and return the
/// per-chunk results in chunk order.
pub fn run_chunked<A, F>(trials: u64, workers: usize, job: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync,
{
    let chunks = chunk_ranges(trials);
    if chunks.is_empty() {
        return Vec::new();
    }
    let workers = effective_workers(workers).min(chunks.len());
    if workers <= 1 {
        return chunks.into_iter().map(job).collect();
    }

    let results: Mutex<Vec<Option<A>>> = Mutex::new((0..chunks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= chunks.len() {
                    break;
                }
                let out = job(chunks[i].clone());
                results.lock().expect("no poisoned chunk results")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned chunk results")
        .into_iter()
        .map(|o| o.expect("every chunk ran"))
        .collect()
}
