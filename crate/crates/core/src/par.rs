//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) independent units of work — Monte
//! Carlo replications, grid evaluations, quadrature entries, optimizer
//! restarts — run on the rayon thread pool. Without it, or after
//! [`set_parallel_enabled`]`(false)`, everything runs sequentially on the
//! calling thread.
//!
//! Outputs are collected in index order and every element is computed by an
//! independent, fixed-order reduction, so results are bitwise identical
//! across thread counts and between the parallel and sequential paths.

#[cfg(feature = "parallel")]
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
static PARALLEL_ENABLED: AtomicBool = AtomicBool::new(true);

/// Enable or disable the rayon path at runtime.
///
/// Intended for benchmarks comparing the parallel and sequential pipelines
/// within one process; no-op when built without the `parallel` feature.
pub fn set_parallel_enabled(enabled: bool) {
    #[cfg(feature = "parallel")]
    PARALLEL_ENABLED.store(enabled, Ordering::Relaxed);
    #[cfg(not(feature = "parallel"))]
    let _ = enabled;
}

/// Whether work will actually be dispatched to rayon.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL_ENABLED.load(Ordering::Relaxed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Whether to dispatch to rayon right now. Nested data-parallel calls run
/// sequentially: when the caller is already a rayon worker (a Monte Carlo
/// replication, say), splitting inner loops only adds scheduling overhead.
#[inline]
fn dispatch_parallel() -> bool {
    #[cfg(feature = "parallel")]
    {
        parallel_enabled() && rayon::current_thread_index().is_none()
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// Map `f` over `0..len`, in parallel when enabled, preserving index order.
pub(crate) fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if dispatch_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}

/// Map `f` over a slice, in parallel when enabled, preserving order.
pub(crate) fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if dispatch_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}
