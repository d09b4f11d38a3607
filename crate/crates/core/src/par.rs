//! Data-parallel helpers. With the `parallel` feature and `jobs > 1` work is
//! spread over a rayon pool; otherwise everything runs on the caller's thread.
//! Results always come back in index order and reductions are done by the
//! caller in that order, so output is bit-identical across job counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed chunk length for chunked reductions. Independent of the job count
/// so summation order never depends on scheduling.
pub const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exec {
    jobs: usize,
}

impl Default for Exec {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Exec {
    /// `jobs == 0` means one job per available core.
    pub fn new(jobs: usize) -> Self {
        let jobs = if jobs == 0 { available_cores() } else { jobs };
        Self { jobs }
    }

    pub fn sequential() -> Self {
        Self { jobs: 1 }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.jobs > 1
    }

    /// `f(0), …, f(n-1)` in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to consecutive `CHUNK`-sized index ranges of `0..n`.
    pub fn map_chunks<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    {
        let chunks = n.div_ceil(CHUNK);
        self.map(chunks, |c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
    }

    /// Runs `f` inside a pool sized to this executor. Without the feature, or
    /// with one job, `f` runs directly.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(self.jobs).build() {
                return pool.install(f);
            }
        }
        f()
    }
}

pub fn available_cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_job_independent() {
        let data: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e-3 + 1.0 / (i as f64 + 1.0)).collect();
        let sum = |exec: Exec| -> f64 {
            exec.install(|| {
                exec.map_chunks(data.len(), |r| data[r].iter().sum::<f64>())
                    .into_iter()
                    .sum()
            })
        };
        assert_eq!(sum(Exec::sequential()).to_bits(), sum(Exec::new(4)).to_bits());
    }
}
