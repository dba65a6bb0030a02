//! Quenched pinning models with correlated Gaussian disorder: exact transfer
//! computations, disorder-averaged estimators, and numerical checks of the
//! model's asymptotic properties.

pub mod disorder;
pub mod estimators;
pub mod polymer;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod verify;

/// Maps `f` over `0..count`, in parallel when the `parallel` feature is on.
/// Output order is always index order.
pub fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

pub fn try_par_map<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    par_map(count, f).into_iter().collect()
}
