//! Data-parallel helpers with a sequential fallback.
//!
//! Every parallel loop in the crate goes through [`Exec`], so the same code
//! path runs on a rayon pool when the `parallel` feature is enabled and on
//! the calling thread otherwise. Work items are always independent and
//! results are collected in input order, which keeps outputs identical
//! across thread counts.

/// Execution strategy for the crate's batch loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Use the current rayon pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Map `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fill `out` in chunks of `chunk` elements; `f` receives the chunk index
    /// and the mutable chunk.
    pub fn for_chunks<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Run `f` inside a pool with `workers` threads. `workers == 0` uses the
/// global pool; without the `parallel` feature the closure runs directly.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("cannot build a {workers}-thread pool ({e}); using the global pool"),
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Exec::Sequential.map(&xs, |x| x * x);
        let b = Exec::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);

        let mut s = vec![0usize; 103];
        let mut p = vec![0usize; 103];
        Exec::Sequential.for_chunks(&mut s, 10, |i, c| c.iter_mut().for_each(|v| *v = i));
        Exec::Parallel.for_chunks(&mut p, 10, |i, c| c.iter_mut().for_each(|v| *v = i));
        assert_eq!(s, p);
    }

    #[test]
    fn with_workers_runs_closure() {
        let r = with_workers(2, || Exec::Parallel.map_range(10, |i| i + 1));
        assert_eq!(r, (1..=10).collect::<Vec<_>>());
    }
}
