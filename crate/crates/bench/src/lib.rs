//! Shared fixtures for the criterion benchmarks.

use bear_core::rng::SeededRng;
use bear_core::synth::gen_composite;
use bear_core::Matrix;

/// `n × m` composite with true rank `rank` and 5% sparse corruption.
pub fn composite(n: usize, m: usize, rank: usize, seed: u64) -> Matrix<f32> {
    gen_composite::<f32>(n, m, rank, 0.05, seed)
        .expect("fixture shape is valid")
        .y
}

/// `N(0, 1/n)` factor of shape `n × r`.
pub fn factor(n: usize, r: usize, seed: u64) -> Matrix<f32> {
    let mut rng = SeededRng::new(seed);
    let std = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(n, r, |_, _| (std * rng.normal()) as f32)
}
