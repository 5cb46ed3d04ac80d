//! Shared fixtures for the benchmarks.

use fpclass_core::sae::LayerParams;
use fpclass_core::GrayImage;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A `rows × cols` batch of values in `[0.1, 0.9]`.
pub fn unit_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.1..0.9))
}

pub fn random_layer(visible: usize, hidden: usize, seed: u64) -> LayerParams {
    LayerParams::random(visible, hidden, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Sinusoidal ridges at angle `phi`.
pub fn ridge_image(size: usize, phi: f64) -> GrayImage {
    let (s, c) = phi.sin_cos();
    GrayImage::from_fn(size, size, |x, y| {
        let t = -(x as f64) * s + y as f64 * c;
        127.5 + 127.0 * (std::f64::consts::TAU * t / 9.0).sin()
    })
}
