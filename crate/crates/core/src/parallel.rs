//! Repetition-level parallelism with a sequential fallback.
//!
//! With the `parallel` feature (default) [`ExecutionMode::Parallel`] fans work
//! out over the rayon pool; without it every mode runs sequentially. Results
//! are always returned in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    Serial,
    #[default]
    Parallel,
}

impl ExecutionMode {
    /// Whether `Parallel` actually runs on multiple threads in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `(0..n).map(f)` collected in order, in parallel when requested and available.
pub fn map_indexed<T, F>(n: usize, mode: ExecutionMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}
