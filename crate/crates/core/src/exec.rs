//! Batch execution: data-parallel over independent items when the `parallel`
//! feature is enabled, sequential otherwise. Output order always follows
//! input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the global pool when `workers` is `None`; a dedicated pool otherwise.
    Parallel {
        workers: Option<usize>,
    },
}

impl Default for Exec {
    fn default() -> Self {
        Exec::Parallel { workers: None }
    }
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        match workers {
            0 => Exec::Parallel { workers: None },
            1 => Exec::Sequential,
            n => Exec::Parallel { workers: Some(n) },
        }
    }

    pub fn map_range<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match *self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel { workers } => parallel::map_range(workers, n, f),
        }
    }

    pub fn map_slice<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }
}

#[cfg(feature = "parallel")]
mod parallel {
    use rayon::prelude::*;

    pub fn map_range<T, F>(workers: Option<usize>, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let run = || (0..n).into_par_iter().map(&f).collect();
        match workers {
            None => run(),
            Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod parallel {
    pub fn map_range<T, F>(_workers: Option<usize>, n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Exec::Sequential.map_range(1000, |i| i * i);
        let par = Exec::default().map_range(1000, |i| i * i);
        let pooled = Exec::with_workers(3).map_range(1000, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq, pooled);
        assert_eq!(Exec::with_workers(1), Exec::Sequential);
    }
}
