use super::{DenseMatrix, FlopCounter};
use crate::error::{shape, Result, SpectraError};

fn op_shape(x: &DenseMatrix, t: bool) -> (usize, usize) {
    if t {
        (x.cols(), x.rows())
    } else {
        x.shape()
    }
}

fn describe(x: &DenseMatrix, t: bool) -> String {
    let s = shape(x.rows(), x.cols());
    if t {
        format!("{s}^T")
    } else {
        s
    }
}

/// Dense product `op(A) * op(B)` where `op` optionally transposes.
///
/// Adds `2 * m * n * p` to `flops` for an `m x p` by `p x n` product.
pub fn matmul(
    a: &DenseMatrix,
    b: &DenseMatrix,
    transpose_a: bool,
    transpose_b: bool,
    flops: &FlopCounter,
) -> Result<DenseMatrix> {
    let (m, ka) = op_shape(a, transpose_a);
    let (kb, n) = op_shape(b, transpose_b);
    if ka != kb {
        return Err(SpectraError::DimensionMismatch {
            op: "matmul",
            left: describe(a, transpose_a),
            right: describe(b, transpose_b),
        });
    }
    let mut out = DenseMatrix::from_vec_unchecked(m, n, vec![0.0; m * n]);
    gemm(1.0, a, transpose_a, b, transpose_b, 0.0, &mut out, flops)?;
    Ok(out)
}

/// In-place `C = alpha * op(A) * op(B) + beta * C`, charged like [`matmul`].
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    alpha: f64,
    a: &DenseMatrix,
    transpose_a: bool,
    b: &DenseMatrix,
    transpose_b: bool,
    beta: f64,
    c: &mut DenseMatrix,
    flops: &FlopCounter,
) -> Result<()> {
    let (m, ka) = op_shape(a, transpose_a);
    let (kb, n) = op_shape(b, transpose_b);
    if ka != kb {
        return Err(SpectraError::DimensionMismatch {
            op: "gemm",
            left: describe(a, transpose_a),
            right: describe(b, transpose_b),
        });
    }
    if c.shape() != (m, n) {
        return Err(SpectraError::DimensionMismatch {
            op: "gemm output",
            left: shape(m, n),
            right: shape(c.rows(), c.cols()),
        });
    }
    let (rsa, csa) = if transpose_a { (1, a.cols()) } else { (a.cols(), 1) };
    let (rsb, csb) = if transpose_b { (1, b.cols()) } else { (b.cols(), 1) };
    // SAFETY: the strides describe exactly the row-major buffers of `a`, `b`
    // and `c`, whose dimensions were checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            ka,
            n,
            alpha,
            a.data().as_ptr(),
            rsa as isize,
            csa as isize,
            b.data().as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    flops.add(2 * (m as u64) * (n as u64) * (ka as u64));
    Ok(())
}

/// Plain `A * B` without FLOP accounting.
pub fn mul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    matmul(a, b, false, false, &FlopCounter::new())
}

/// `A^T * B` without FLOP accounting.
pub fn mul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    matmul(a, b, true, false, &FlopCounter::new())
}

/// `A * B^T` without FLOP accounting.
pub fn mul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    matmul(a, b, false, true, &FlopCounter::new())
}

/// `U diag(s) V^T` for `U: m x k`, `V: n x k`.
pub fn low_rank_product(u: &DenseMatrix, s: &[f64], v: &DenseMatrix, flops: &FlopCounter) -> Result<DenseMatrix> {
    let mut us = u.clone();
    us.scale_columns(s);
    matmul(&us, v, false, true, flops)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_accumulates() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let mut c = DenseMatrix::identity(2);
        let f = FlopCounter::new();
        gemm(2.0, &a, false, &a, true, -1.0, &mut c, &f).unwrap();
        // A A^T = [[5, 11], [11, 25]]
        assert_eq!(c, DenseMatrix::from_rows(&[&[9.0, 22.0], &[22.0, 49.0]]).unwrap());
        assert_eq!(f.get(), 16);
        let mut bad = DenseMatrix::zeros(3, 2);
        assert!(gemm(1.0, &a, false, &a, false, 0.0, &mut bad, &f).is_err());
    }

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|p| a[(i, p)] * b[(p, j)]).sum())
    }

    #[test]
    fn identity_is_neutral() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let c = FlopCounter::new();
        assert_eq!(matmul(&DenseMatrix::identity(3), &a, false, false, &c).unwrap(), a);
    }

    #[test]
    fn hand_multiplied_product() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]).unwrap();
        let c = FlopCounter::new();
        let p = matmul(&a, &b, false, false, &c).unwrap();
        assert_eq!(p, DenseMatrix::from_rows(&[&[4.0, 5.0], &[10.0, 11.0]]).unwrap());
        assert_eq!(c.get(), 2 * 2 * 2 * 3);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        let err = matmul(&a, &b, false, false, &FlopCounter::new()).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("matmul"), "{err}");
        assert!(matmul(&a, &b, false, true, &FlopCounter::new()).is_ok());
    }

    #[test]
    fn transposes_match_naive() {
        let a = DenseMatrix::from_fn(5, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let b = DenseMatrix::from_fn(5, 4, |i, j| ((i * 2 + j * 5) % 7) as f64 * 0.5);
        let c = FlopCounter::new();
        let tn = matmul(&a, &b, true, false, &c).unwrap();
        assert_eq!(tn, naive(&a.transpose(), &b));
        let nt = matmul(&a.transpose(), &b.transpose(), false, true, &c).unwrap();
        assert_eq!(nt, tn);
        let tt = matmul(&b, &a.transpose(), true, true, &c).unwrap();
        assert_eq!(tt, naive(&b.transpose(), &a));
        assert_eq!(c.get(), 2 * (3 * 4 * 5) * 3);
    }
}
