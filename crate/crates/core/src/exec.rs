//! Execution strategy for the data-parallel inner loops.
//!
//! With the `parallel` feature the loops fan out over rayon's pool; without
//! it every mode runs sequentially. Work items are indexed and aggregated by
//! index, so results never depend on scheduling.

/// How an inner loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Fan out when the `parallel` feature is compiled in.
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    /// True when this mode will actually run on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Number of indices in `0..n` for which `pred` holds.
pub(crate) fn count_range<F>(mode: ExecMode, n: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().filter(|&i| pred(i)).count();
    }
    let _ = mode;
    (0..n).filter(|&i| pred(i)).count()
}

/// `items.iter().map(f)` collected in input order.
pub(crate) fn map_slice<I, T, F>(mode: ExecMode, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}
