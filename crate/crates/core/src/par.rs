//! Thin switch between rayon and plain iterators.
//!
//! With the `parallel` feature (default) the helpers fan out over the
//! current rayon pool; without it they run on the calling thread. Callers
//! never see the difference except in wall-clock time.

/// Below this many scalar multiply-adds a parallel split costs more than it
/// saves.
pub const MIN_PARALLEL_WORK: usize = 1 << 15;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, work_per_item: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if len.saturating_mul(work_per_item) < MIN_PARALLEL_WORK || len < 2 {
        (0..len).map(f).collect()
    } else {
        (0..len).into_par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, _work_per_item: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Map over independent coarse-grained jobs (per-class fits, grid points).
#[cfg(feature = "parallel")]
pub fn map_jobs<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_jobs<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Run `f` with at most `threads` workers. Without the `parallel` feature
/// this simply calls `f`.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) if n >= 1 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let small = map_indexed(10, 1, |i| i * 2);
        assert_eq!(small, (0..10).map(|i| i * 2).collect::<Vec<_>>());
        let big = map_indexed(5000, 1000, |i| i + 1);
        assert_eq!(big, (1..=5000).collect::<Vec<_>>());
    }

    #[test]
    fn single_thread_pool_runs() {
        let v = with_threads(Some(1), || map_jobs(&[1, 2, 3], |x| x * x));
        assert_eq!(v, vec![1, 4, 9]);
    }
}
