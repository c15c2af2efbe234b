//! Order-preserving map over item indices, optionally on a rayon pool.
//!
//! Results are collected by index, so the output is identical for any
//! worker count as long as `f` itself is deterministic per index.

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;

/// Number of worker threads for data-parallel loops. `1` runs inline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Workers(usize);

impl Workers {
    pub fn new(n: usize) -> Self {
        Workers(n.max(1))
    }

    pub fn sequential() -> Self {
        Workers(1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self.0 > 1
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers(1)
    }
}

pub fn map_indexed<T, F>(n: usize, workers: Workers, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if workers.is_parallel() {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.get())
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        return pool.install(|| (0..n).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..n).map(f).collect()
}
