//! Data-parallel map helpers.
//!
//! Every hot loop in the crate (grid scans, envelope fits, Monte-Carlo trials)
//! funnels through [`map_indexed`], which evaluates a pure function over
//! `0..n` and returns results in index order. With the `parallel` feature the
//! evaluation runs on rayon; reductions downstream always fold the returned
//! vector sequentially, so results are identical bit-for-bit with and without
//! the feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this size the rayon dispatch overhead outweighs the work.
const PARALLEL_CUTOFF: usize = 512;

/// Evaluate `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= PARALLEL_CUTOFF {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    map_indexed_seq(n, f)
}

/// Sequential reference version of [`map_indexed`]; used by the benches to
/// compare against the parallel path.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Cap the global worker pool at `jobs` threads. A no-op without the
/// `parallel` feature, and after the pool has already been built.
pub fn configure_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let f = |i: usize| (i as f64).sin() * 1e-3 + (i as f64).sqrt();
        let a = map_indexed(10_000, f);
        let b = map_indexed_seq(10_000, f);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
