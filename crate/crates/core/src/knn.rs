//! Flat-kernel k-nearest-neighbour density baseline:
//! `g(x) = k / (N V_n(R_k))` with `R_k` the distance to the `k`-th neighbour.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::unit_ball_volume;
use crate::neighbors::NeighborIndex;
use crate::sample::Dimension;

/// Volume of the `n`-ball of radius `radius`.
pub fn ball_volume(dim: Dimension, radius: f64) -> f64 {
    unit_ball_volume(dim) * radius.powi(dim.get() as i32)
}

/// k-NN density at `x`. A sample point coinciding with `x` is not counted.
pub fn knn_density(index: &NeighborIndex, x: &[f64], k: usize) -> Result<f64> {
    let sample = index.sample();
    let radius = index.kth_distance(x, k, true)?;
    if radius == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(k as f64 / (sample.len() as f64 * ball_volume(sample.dim(), radius)))
}

/// k-NN densities at row-major `points`, in order.
pub fn knn_density_batch(index: &NeighborIndex, points: &[f64], k: usize, exec: Execution) -> Result<Vec<f64>> {
    let n = index.sample().dim().get();
    if points.len() % n != 0 {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: points.len() % n,
        });
    }
    exec.map_indices(points.len() / n, |i| knn_density(index, &points[i * n..(i + 1) * n], k))
        .into_iter()
        .collect()
}

/// Default `k` matching the exclusion sphere of a Green's estimate.
pub fn matched_k(dim: Dimension, n_large_eval: usize) -> usize {
    dim.get() * n_large_eval
}
