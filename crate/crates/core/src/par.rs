//! Index-parallel map that degrades to a plain loop when the `parallel`
//! feature is off (for example on wasm32, which has no threads).

use std::ops::Range;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(range: Range<usize>, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        range.into_par_iter().map(f).collect()
    } else {
        range.map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(range: Range<usize>, _parallel: bool, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    range.map(f).collect()
}
