//! Worker pool abstraction over independent sample chunks.
//!
//! Work is always cut into the same fixed-size chunks regardless of the
//! worker count, and chunk results come back in chunk order, so reductions
//! performed by the caller are bit-for-bit identical for any number of
//! workers. Without the `parallel` feature every request runs sequentially.

/// Samples per chunk.
pub const CHUNK: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Execution {
    workers: usize,
}

impl Default for Execution {
    fn default() -> Self {
        Execution::available()
    }
}

impl Execution {
    pub fn sequential() -> Self {
        Execution { workers: 1 }
    }

    pub fn workers(n: usize) -> Self {
        Execution { workers: n.max(1) }
    }

    pub fn available() -> Self {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        Execution { workers: n }
    }

    pub fn worker_count(&self) -> usize {
        self.workers
    }

    /// Splits `samples` into chunks and evaluates `f(chunk_index, range)` for
    /// each, returning results in chunk order.
    pub fn map_chunks<T, F>(&self, samples: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, std::ops::Range<u64>) -> T + Sync + Send,
    {
        let n_chunks = samples.div_ceil(CHUNK) as usize;
        let range_of = |c: usize| {
            let lo = c as u64 * CHUNK;
            lo..(lo + CHUNK).min(samples)
        };
        self.run(n_chunks, |c| f(c, range_of(c)))
    }

    #[cfg(feature = "parallel")]
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        use rayon::prelude::*;
        if self.workers <= 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(_) => (0..n).map(f).collect(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
