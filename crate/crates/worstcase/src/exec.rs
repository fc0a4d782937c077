use rayon::prelude::*;
use worstcase_core::exec::Executor;

/// Work-stealing executor on the current rayon pool. Results come back in
/// index order, so outputs match [`worstcase_core::exec::Sequential`]
/// bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}
