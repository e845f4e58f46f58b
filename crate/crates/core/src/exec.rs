//! Execution strategy for the data-parallel kernels.
//!
//! Assembly and matrix-vector products are embarrassingly parallel over
//! matrix rows. Both run either sequentially or on the rayon thread pool;
//! the choice is made per operator at assembly time and every kernel is
//! deterministic in either mode (each output entry is produced by exactly
//! one task, with a fixed sequential reduction order inside the entry).

/// Which engine the row-parallel kernels run on.
///
/// `Rayon` is only available with the `parallel` feature (enabled by
/// default); the sequential path is always compiled and is the fallback
/// default when the feature is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Plain loops on the calling thread.
    Sequential,
    /// Row-parallel loops on the global rayon pool.
    #[cfg(feature = "parallel")]
    Rayon,
}

// not derivable: the default variant depends on the feature set
#[allow(clippy::derivable_impls)]
impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Rayon
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

impl Parallelism {
    /// Fill `out[i] = f(i)` for every index, in parallel when enabled.
    pub(crate) fn fill_indexed<F>(self, out: &mut [f64], f: F)
    where
        F: Fn(usize) -> f64 + Sync,
    {
        match self {
            Parallelism::Sequential => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = f(i);
                }
            }
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => {
                use rayon::prelude::*;
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            }
        }
    }

    /// Run `f(j, chunk_j)` over equal-length contiguous chunks of `data`
    /// (one chunk per matrix column), in parallel when enabled.
    pub(crate) fn fill_chunks<F>(self, data: &mut [f64], chunk: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        debug_assert_eq!(data.len() % chunk, 0);
        match self {
            Parallelism::Sequential => {
                for (j, c) in data.chunks_mut(chunk).enumerate() {
                    f(j, c);
                }
            }
            #[cfg(feature = "parallel")]
            Parallelism::Rayon => {
                use rayon::prelude::*;
                data.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(j, c)| f(j, c));
            }
        }
    }
}
