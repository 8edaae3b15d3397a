//! Sequential / data-parallel execution switch.
//!
//! Every parallel map in the workspace goes through [`Execution::map`], which
//! always returns results in index order. Callers reduce the returned vector
//! sequentially, so the outcome is bitwise identical for any thread count.
//! Without the `parallel` feature, [`Execution::Parallel`] runs sequentially.

/// Environment variable capping worker threads for the global pool.
pub const THREADS_ENV: &str = "LIEOPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Evaluates `f(0), .., f(n - 1)` and returns the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Parallel => parallel_map(n, f),
        }
    }

    /// True when this mode actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        self == Execution::Parallel && cfg!(feature = "parallel")
    }

    /// Worker threads a map in this mode would use.
    pub fn workers(self) -> usize {
        if !self.is_parallel() {
            return 1;
        }
        #[cfg(feature = "parallel")]
        {
            rayon::current_num_threads()
        }
        #[cfg(not(feature = "parallel"))]
        {
            1
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Configures the global worker pool from `LIEOPT_THREADS`.
///
/// Returns the thread count that was requested, or `None` when the variable is
/// unset or unparsable (the machine default then applies). Calling this more
/// than once is harmless; only the first successful call takes effect.
pub fn init_threads_from_env() -> Option<usize> {
    let requested = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(requested)
            .build_global();
    }
    Some(requested)
}
