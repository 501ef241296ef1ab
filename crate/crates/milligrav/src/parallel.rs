//! Data-parallel map helpers with a sequential fallback.
//!
//! Every caller maps an element-wise pure function over an index range or a
//! slice, so results are identical (bit for bit) whichever lane runs: the
//! rayon path only changes evaluation order of independent elements, never
//! the per-element arithmetic or the output order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub(crate) fn map_index<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_index<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Map `f` over a slice of frequencies (or any f64 samples).
#[cfg(feature = "parallel")]
pub(crate) fn map_f64<F>(xs: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    xs.par_iter().map(|&x| f(x)).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_f64<F>(xs: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    xs.iter().map(|&x| f(x)).collect()
}
