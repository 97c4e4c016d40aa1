use rand::Rng;
use rand_distr::StandardNormal;

use super::{thin_qr, DenseMatrix, FlopCounter};
use crate::seed;

/// I.i.d. standard normal matrix; identical seeds give bit-identical output.
pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = seed::stream(seed, "gaussian", 0);
    gaussian_from_rng(rows, cols, &mut rng)
}

/// Standard normal matrix drawn from an existing generator.
pub fn gaussian_from_rng<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_vec_unchecked(rows, cols, data)
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`), taken from
/// the QR factor of a Gaussian matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let g = gaussian_from_rng(rows, cols, rng);
    thin_qr(&g, &FlopCounter::new()).expect("Gaussian sketch has rows >= cols and finite entries").q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(random_gaussian(4, 4, 1), random_gaussian(4, 4, 1));
        assert_ne!(random_gaussian(4, 4, 1), random_gaussian(4, 4, 2));
    }

    #[test]
    fn shape_and_finiteness() {
        let g = random_gaussian(2, 3, 3);
        assert_eq!(g.shape(), (2, 3));
        assert_eq!(g.len(), 6);
        assert!(g.is_finite());
    }

    #[test]
    fn large_sample_mean_near_zero() {
        let g = random_gaussian(1000, 1000, 2);
        let mean = g.data().iter().sum::<f64>() / g.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let var = g.data().iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }
}
