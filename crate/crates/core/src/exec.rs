//! Path-level execution: a rayon pool when the `parallel` feature is on, a
//! plain loop otherwise.
//!
//! Results always come back indexed by path, and every reduction downstream
//! runs over that vector in index order, so the worker count never changes a
//! reported number.

#[cfg(feature = "parallel")]
use crate::error::LabError;
use crate::error::Result;

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "HAWKES_LAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// `None` lets rayon pick (or [`WORKERS_ENV`] when set).
    #[default]
    Parallel,
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Workers(n),
            None => match std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()) {
                Some(1) => Execution::Sequential,
                Some(n) => Execution::Workers(n),
                None => Execution::Parallel,
            },
        }
    }

    /// Evaluate `f(0..n)` and return the results in index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(&f).collect(),
            Execution::Parallel => par_map(n, &f),
            Execution::Workers(w) => {
                #[cfg(feature = "parallel")]
                {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads((*w).max(1))
                        .build()
                        .map_err(|e| LabError::Configuration(format!("thread pool: {e}")))?;
                    pool.install(|| par_map(n, &f))
                }
                #[cfg(not(feature = "parallel"))]
                {
                    let _ = w;
                    (0..n).map(&f).collect()
                }
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Send, F: Fn(usize) -> Result<T> + Sync + Send>(n: usize, f: &F) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send, F: Fn(usize) -> Result<T> + Sync + Send>(n: usize, f: &F) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}
