//! Batch execution of independent simulation points.
//!
//! Sweep points are independent scenes; result aggregation is keyed by
//! input order, so the parallel and sequential executors produce identical
//! output. Each simulation remains single-threaded internally (Gauss-Seidel
//! is sequential); only the batch level fans out. The `parallel` feature
//! (default) selects the rayon path; without it everything runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `f` over `items` sequentially, preserving order.
pub fn run_batch_sequential<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Run `f` over `items` on the rayon pool, preserving order.
#[cfg(feature = "parallel")]
pub fn run_batch_parallel<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Feature-selected default executor.
#[cfg(feature = "parallel")]
pub fn run_batch<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    run_batch_parallel(items, f)
}

/// Feature-selected default executor (sequential fallback).
#[cfg(not(feature = "parallel"))]
pub fn run_batch<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    run_batch_sequential(items, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_preserves_order() {
        let out = run_batch(vec![3, 1, 2], |x| x * 10);
        assert_eq!(out, vec![30, 10, 20]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let items: Vec<u64> = (0..100).collect();
        let seq = run_batch_sequential(items.clone(), |x| x.wrapping_mul(2654435761));
        let par = run_batch_parallel(items, |x| x.wrapping_mul(2654435761));
        assert_eq!(seq, par);
    }
}
