//! Shared inputs for the benchmarks.

use cubv_core::synthgen::sample_dataset;
use cubv_core::{Dataset, PointSet, ProblemParams};

/// Single-mode Gaussian sample of `n_samples` rows in `dimension` dimensions.
pub fn gaussian_sample(n_samples: usize, dimension: usize, d: f64, seed: u64) -> Dataset {
    let spec = ProblemParams::single_mode(dimension, d).build().expect("valid problem");
    sample_dataset(&spec, n_samples, seed).expect("sampling succeeds")
}

pub fn random_points(count: usize, dimension: usize, seed: u64) -> PointSet {
    PointSet::gaussian(count, dimension, seed)
}

pub fn alternating_labels(count: usize) -> Vec<u8> {
    (0..count).map(|i| (i % 2) as u8).collect()
}
