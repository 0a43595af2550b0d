//! Data-parallel mapping with a sequential fallback.
//!
//! Hot loops in this crate (split search, batch prediction, per-query
//! counterfactual generation, grid evaluation) are expressed through
//! [`maybe_par_map`]. With the default `parallel` feature the map runs on
//! rayon; without it the same closure runs sequentially. Both paths collect
//! results in input order, so enabling parallelism never changes output
//! bytes — reductions over the mapped results happen after collection, in a
//! fixed order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
///
/// Output order always matches input order.
#[cfg(feature = "parallel")]
pub fn maybe_par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn maybe_par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over an index range, in parallel when enabled. Order-preserving.
#[cfg(feature = "parallel")]
pub fn maybe_par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn maybe_par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u32> = (0..1000).collect();
        let ys = maybe_par_map(&xs, |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        let zs = maybe_par_map_range(1000, |i| i as u32 * 2);
        assert_eq!(zs, ys);
    }
}
