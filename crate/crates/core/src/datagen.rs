//! Seeded synthetic samples: an isotropic Gaussian and a benchmark of twelve
//! narrow Gaussians on a flat background.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sample::{Dimension, SampleSet};

/// Width of every benchmark signal component.
pub const TWELVE_SIGMA: f64 = 0.02;

/// Centers of the twelve benchmark components: a 4×3 grid in the unit square.
pub fn twelve_centers() -> [[f64; 2]; 12] {
    let mut centers = [[0.0; 2]; 12];
    for i in 0..4 {
        for j in 0..3 {
            centers[i * 3 + j] = [(2 * i + 1) as f64 / 8.0, (2 * j + 1) as f64 / 6.0];
        }
    }
    centers
}

/// Density of the benchmark signal mixture at `x`.
pub fn twelve_density(x: &[f64]) -> f64 {
    let norm = 1.0 / (12.0 * 2.0 * std::f64::consts::PI * TWELVE_SIGMA * TWELVE_SIGMA);
    twelve_centers()
        .iter()
        .map(|c| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            norm * (-d2 / (2.0 * TWELVE_SIGMA * TWELVE_SIGMA)).exp()
        })
        .sum()
}

/// Density of a centered isotropic Gaussian with width `sigma` at `x`.
pub fn gaussian_density(x: &[f64], sigma: f64) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|c| c * c).sum();
    (-r2 / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma).powf(n / 2.0)
}

fn check_size(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            found: len,
        });
    }
    Ok(())
}

/// `len` independent draws from `N(0, sigma² I)`.
pub fn sample_gaussian(dim: Dimension, len: usize, sigma: f64, seed: u64) -> Result<SampleSet> {
    check_size(len)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..len * dim.get())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SampleSet::new(dim, coords)
}

/// Benchmark signal with the mixture component of every event.
pub fn sample_twelve_labeled(len: usize, seed: u64) -> Result<(SampleSet, Vec<usize>)> {
    check_size(len)?;
    let centers = twelve_centers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * len);
    // every component receives len/12 events, the remainder going to the
    // lowest-numbered components; the order is shuffled
    let mut labels: Vec<usize> = (0..len).map(|i| i % 12).collect();
    labels.shuffle(&mut rng);
    for &c in &labels {
        for axis in 0..2 {
            coords.push(centers[c][axis] + TWELVE_SIGMA * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok((SampleSet::new(Dimension::new(2)?, coords)?, labels))
}

/// Uniform sample on the unit square.
pub fn sample_flat(len: usize, seed: u64) -> Result<SampleSet> {
    check_size(len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let coords = (0..2 * len).map(|_| rng.random::<f64>()).collect();
    SampleSet::new(Dimension::new(2)?, coords)
}

/// Signal (twelve Gaussians) and background (flat) samples for one seed.
pub fn sample_twelve_plus_flat(
    n_signal: usize,
    n_background: usize,
    seed: u64,
) -> Result<(SampleSet, SampleSet)> {
    let (signal, _) = sample_twelve_labeled(n_signal, seed)?;
    Ok((signal, sample_flat(n_background, seed)?))
}
