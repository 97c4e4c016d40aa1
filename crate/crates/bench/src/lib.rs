//! Shared fixtures for the criterion benches.

use spectra_core::matrix::random_gaussian;
use spectra_core::DenseMatrix;

/// Square shapes small enough to iterate on one core.
pub const SHAPES: [(usize, usize); 3] = [(128, 128), (256, 256), (512, 512)];

/// Gaussian gradient with a rank-one spike along the first coordinates,
/// roughly what the spectral methods see in training.
pub fn spiked_gradient(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let noise = random_gaussian(m, n, seed);
    let scale = 10.0 * (m.max(n) as f64).sqrt() / ((m * n) as f64).sqrt();
    DenseMatrix::from_fn(m, n, |i, j| {
        let u = if i % 2 == 0 { 1.0 } else { -1.0 };
        let v = if j % 3 == 0 { 1.0 } else { 0.5 };
        noise.row(i)[j] + scale * u * v
    })
}
