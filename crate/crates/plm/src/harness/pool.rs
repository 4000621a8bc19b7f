//! Bounded worker pool: workers pull task indices and send results to a single
//! collector, which restores task order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

/// Worker count from `PLM_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("PLM_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Applies `f` to every task on up to `workers` threads; output order matches
/// `tasks` regardless of scheduling.
pub fn run_pool<T, R, F>(tasks: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let len = tasks.len();
    if len == 0 {
        return Vec::new();
    }
    let workers = workers.clamp(1, len);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, R)>();
    let mut out: Vec<Option<R>> = (0..len).map(|_| None).collect();
    thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= len {
                    break;
                }
                if tx.send((k, f(&tasks[k]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (k, r) in rx {
            out[k] = Some(r);
        }
    });
    out.into_iter().map(|r| r.expect("every task reports")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let tasks: Vec<u64> = (0..200).collect();
        let f = |&t: &u64| crate::rng::stable_hash(&[t, 7]);
        let one = run_pool(&tasks, 1, f);
        let many = run_pool(&tasks, 8, f);
        assert_eq!(one, many);
        assert!(run_pool(&Vec::<u64>::new(), 4, f).is_empty());
    }
}
