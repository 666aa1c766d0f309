//! Data-parallel helpers with a sequential fallback when the `parallel`
//! feature is disabled. Results are always returned in index order, so the
//! output is identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps over a slice, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}
