//! Order-preserving map over independent work items, sequential or on a
//! rayon pool.

/// How independent runs in a sweep are evaluated. Results are always
/// returned in input order, so output is identical for both variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    /// Data-parallel with an optional thread cap. Without the `parallel`
    /// feature this falls back to sequential evaluation.
    Parallel { threads: Option<usize> },
}

impl Default for Executor {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Executor::Parallel { threads: None }
        } else {
            Executor::Sequential
        }
    }
}

impl Executor {
    /// `Some(1)` is sequential, anything else parallel with that cap.
    pub fn with_threads(threads: Option<usize>) -> Self {
        match threads {
            Some(1) => Executor::Sequential,
            Some(0) | None => Executor::Parallel { threads: None },
            t => Executor::Parallel { threads: t },
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Executor::Parallel { .. })
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Executor::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel { threads } => {
                use rayon::prelude::*;
                match threads {
                    Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
                        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                        Err(_) => items.iter().map(f).collect(),
                    },
                    None => items.par_iter().map(f).collect(),
                }
            }
            #[cfg(not(feature = "parallel"))]
            Executor::Parallel { .. } => items.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Executor::Sequential.map(&items, |x| x * x);
        let par = Executor::Parallel { threads: Some(3) }.map(&items, |x| x * x);
        let all = Executor::Parallel { threads: None }.map(&items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq, all);
    }

    #[test]
    fn thread_selection() {
        assert_eq!(Executor::with_threads(Some(1)), Executor::Sequential);
        assert_eq!(Executor::with_threads(None), Executor::Parallel { threads: None });
        assert_eq!(Executor::with_threads(Some(4)), Executor::Parallel { threads: Some(4) });
    }
}
