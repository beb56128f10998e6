//! Order-preserving data-parallel map. Results never depend on the worker
//! count; with the `parallel` feature off everything runs on the caller's
//! thread.

/// Below this many items a batch is mapped sequentially.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_BATCH: usize = 64;

pub struct Workers {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    /// `jobs == 1` is sequential; `jobs == 0` uses all available cores.
    pub fn new(jobs: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if jobs == 1 {
                None
            } else {
                rayon::ThreadPoolBuilder::new().num_threads(jobs).build().ok()
            };
            Workers { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = jobs;
            Workers {}
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            if items.len() >= MIN_PARALLEL_BATCH {
                use rayon::prelude::*;
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
        items.iter().map(f).collect()
    }
}
