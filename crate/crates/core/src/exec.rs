//! Execution strategy for the data-parallel stages.
//!
//! With the `parallel` feature (default) row loops run on the rayon pool;
//! without it every strategy degrades to the sequential loop. Both paths
//! produce bit-identical output because rows are written independently.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Runs `f(y, row)` over every `width`-sized row of `out`.
    pub fn for_each_row<T, F>(self, out: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => out.par_chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row)),
            _ => out.chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row)),
        }
    }

    /// Maps `0..n` through `f`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }
}
