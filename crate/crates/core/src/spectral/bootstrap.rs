use crate::error::{shape, Result, SpectraError};
use crate::matrix::{exact_svd, gaussian_from_rng, matmul, thin_qr, DenseMatrix, FlopCounter, SvdFactors};
use crate::seed;

#[derive(Debug, Clone)]
pub struct BootstrapOutput {
    pub factors: SvdFactors,
    /// The input was identically zero; the factors are arbitrary orthonormal
    /// directions with zero scales.
    pub degenerate: bool,
    /// Sketch width actually used (`k + oversample`, clamped to `min(m, n)`).
    pub sketch_width: usize,
}

/// Randomized range finder: Gaussian sketch, one power pass, thin QR and an
/// exact SVD of the small projected matrix, truncated to rank `k`.
///
/// The sketch width is clamped to `min(m, n)`, so `k == min(m, n)` reduces
/// to an exact decomposition.
pub fn bootstrap_lowrank_svd(
    g: &DenseMatrix,
    k: usize,
    oversample: usize,
    seed: u64,
    flops: &FlopCounter,
) -> Result<BootstrapOutput> {
    let (m, n) = g.shape();
    let r = m.min(n);
    if k == 0 || k > r {
        return Err(SpectraError::InvalidArgument(format!(
            "rank k = {k} must lie in 1..={r} for a {} matrix",
            shape(m, n)
        )));
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("bootstrap_lowrank_svd"));
    }
    let l = (k + oversample).min(r);
    let mut rng = seed::stream(seed, "sketch", 0);
    let omega = gaussian_from_rng(n, l, &mut rng);

    let y = matmul(g, &omega, false, false, flops)?;
    let q = thin_qr(&y, flops)?.q;
    let z = matmul(g, &q, true, false, flops)?;
    let qz = thin_qr(&z, flops)?.q;
    let y = matmul(g, &qz, false, false, flops)?;
    let q = thin_qr(&y, flops)?.q;

    // B = Q^T G is l x n. Factor B^T = Q_b R_b so that B = R_b^T Q_b^T and
    // only the l x l matrix R_b^T needs an exact SVD.
    let bt = matmul(g, &q, true, false, flops)?;
    let qr_b = thin_qr(&bt, flops)?;
    let small = exact_svd(&qr_b.r.transpose())?;
    let u = matmul(&q, &small.u, false, false, flops)?;
    let v = matmul(&qr_b.q, &small.v, false, false, flops)?;

    let full = SvdFactors { u, s: small.s, v };
    Ok(BootstrapOutput { factors: full.truncate(k), degenerate: g.is_zero(), sketch_width: l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_gaussian;

    #[test]
    fn padded_diagonal_top_two() {
        let mut d = DenseMatrix::zeros(8, 8);
        for (i, s) in [5.0, 4.0, 3.0, 2.0, 1.0].iter().enumerate() {
            d[(i, i)] = *s;
        }
        let out = bootstrap_lowrank_svd(&d, 2, 8, 1, &FlopCounter::new()).unwrap();
        assert!((out.factors.s[0] - 5.0).abs() < 1e-6);
        assert!((out.factors.s[1] - 4.0).abs() < 1e-6);
        assert_eq!(out.sketch_width, 8);
    }

    #[test]
    fn zero_matrix_is_flagged() {
        let out = bootstrap_lowrank_svd(&DenseMatrix::zeros(6, 4), 1, 2, 1, &FlopCounter::new()).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.factors.s, vec![0.0]);
        assert!(out.factors.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn full_rank_matches_exact() {
        let g = random_gaussian(32, 32, 3);
        let exact = exact_svd(&g).unwrap();
        let out = bootstrap_lowrank_svd(&g, 32, 8, 4, &FlopCounter::new()).unwrap();
        for (a, b) in out.factors.s.iter().zip(&exact.s) {
            assert!((a - b).abs() <= 1e-6 * exact.s[0]);
        }
        assert!(out.factors.reconstruct().sub(&g).unwrap().frobenius_norm() < 1e-8 * g.frobenius_norm());
    }

    #[test]
    fn deterministic_under_seed() {
        let g = random_gaussian(20, 30, 5);
        let a = bootstrap_lowrank_svd(&g, 3, 4, 11, &FlopCounter::new()).unwrap();
        let b = bootstrap_lowrank_svd(&g, 3, 4, 11, &FlopCounter::new()).unwrap();
        assert_eq!(a.factors, b.factors);
        assert!(bootstrap_lowrank_svd(&g, 21, 0, 1, &FlopCounter::new()).is_err());
    }

    #[test]
    fn flops_match_model() {
        let g = random_gaussian(25, 18, 5);
        let f = FlopCounter::new();
        bootstrap_lowrank_svd(&g, 3, 4, 1, &f).unwrap();
        assert_eq!(f.get(), crate::spectral::cost_model::bootstrap_flops(25, 18, 3, 4));
    }
}
