//! Feature-gated data parallelism.
//!
//! With the `parallel` feature (default) the hot loops fan out over rayon;
//! without it, or when a caller asks for the sequential path explicitly,
//! the same closures run on one thread. Work is always partitioned by index
//! so results are bitwise identical either way.

/// Map `f` over `0..n`, in parallel when both the feature and the flag allow.
pub(crate) fn maybe_par_map<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}
