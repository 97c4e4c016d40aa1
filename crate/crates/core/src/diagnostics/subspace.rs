use crate::error::{shape, Result, SpectraError};
use crate::matrix::{exact_svd, mul_tn, DenseMatrix};

/// Accepted departure from orthonormality for subspace comparisons.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Canonical correlations between two orthonormal bases: the singular values
/// of `V_a^T V_b`, clipped to `[0, 1]`, descending.
pub fn canonical_correlations(va: &DenseMatrix, vb: &DenseMatrix) -> Result<Vec<f64>> {
    if va.rows() != vb.rows() {
        return Err(SpectraError::DimensionMismatch {
            op: "subspace_similarity",
            left: shape(va.rows(), va.cols()),
            right: shape(vb.rows(), vb.cols()),
        });
    }
    for (name, v) in [("first", va), ("second", vb)] {
        let defect = v.orthonormality_defect();
        if defect > ORTHONORMAL_TOLERANCE {
            return Err(SpectraError::InvalidArgument(format!(
                "{name} basis is not orthonormal (defect {defect:.3e})"
            )));
        }
    }
    let s = exact_svd(&mul_tn(va, vb)?)?.s;
    Ok(s.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

/// Largest canonical correlation between two subspaces.
pub fn subspace_similarity(va: &DenseMatrix, vb: &DenseMatrix) -> Result<f64> {
    Ok(canonical_correlations(va, vb)?[0])
}

/// Mean canonical correlation; a stricter secondary metric.
pub fn mean_canonical_correlation(va: &DenseMatrix, vb: &DenseMatrix) -> Result<f64> {
    let c = canonical_correlations(va, vb)?;
    Ok(c.iter().sum::<f64>() / c.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{mul, random_orthonormal};

    #[test]
    fn identical_and_orthogonal() {
        let mut rng = crate::seed::stream(1, "sub", 0);
        let q = random_orthonormal(10, 6, &mut rng);
        let a = q.leading_columns(3);
        let b = DenseMatrix::from_fn(10, 3, |i, j| q[(i, j + 3)]);
        assert!((subspace_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(subspace_similarity(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn rotation_invariant() {
        let mut rng = crate::seed::stream(2, "sub", 0);
        let a = random_orthonormal(12, 4, &mut rng);
        let q = random_orthonormal(4, 4, &mut rng);
        let b = mul(&a, &q).unwrap();
        assert!((subspace_similarity(&a, &b).unwrap() - 1.0).abs() < 1e-10);
        assert!((mean_canonical_correlation(&a, &b).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_orthonormal() {
        let a = DenseMatrix::eye(5, 2).scaled(2.0);
        assert!(subspace_similarity(&a, &DenseMatrix::eye(5, 2)).is_err());
    }
}
