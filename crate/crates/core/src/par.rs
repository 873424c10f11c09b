//! Order-preserving parallel map.
//!
//! With the `std` feature the closures run on the rayon pool; otherwise they
//! run in sequence. Outputs are always collected in index order, so callers
//! that reduce them sequentially get bitwise-identical results either way.

use crate::prelude::*;

/// Applies `f` to every index in `0..n` and returns the results in order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "std")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "std"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fallible variant of [`map_indexed`]; the first error by index wins.
pub fn try_map_indexed<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}
