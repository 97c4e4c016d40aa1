use super::DenseMatrix;
use crate::error::{Result, SpectraError};

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DenseMatrix,
}

impl SymEigen {
    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }
}

/// Cyclic Jacobi eigensolver. The input must be square and symmetric to
/// within `1e-10` relative to its largest entry.
pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    let (n, c) = a.shape();
    if n != c {
        return Err(SpectraError::InvalidArgument(format!("sym_eigen needs a square matrix, got {n}x{c}")));
    }
    if !a.is_finite() {
        return Err(SpectraError::NonFinite("sym_eigen"));
    }
    let scale = a.max_abs();
    if a.asymmetry() > 1e-10 * scale.max(1e-300) {
        return Err(SpectraError::InvalidArgument(format!(
            "sym_eigen input is not symmetric (asymmetry {:.3e})",
            a.asymmetry()
        )));
    }

    let mut w = a.clone();
    // Symmetrize exactly so rotations stay consistent.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = avg;
            w[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let max_sweeps = 100 * n.max(1);
    // Rounding stalls the off-diagonal mass near `eps * ||A||_F`; accept a
    // stalled sweep once it is below the looser bound.
    let fro = a.frobenius_norm();
    let (tight, loose) = (1e-15 * fro, 1e-12 * fro);
    let mut off = off_diagonal(&w);
    let mut sweeps = 0;
    while off > tight && sweeps < max_sweeps {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (wkp, wkq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = cs * wkp - sn * wkq;
                    w[(k, q)] = sn * wkp + cs * wkq;
                }
                for k in 0..n {
                    let (wpk, wqk) = (w[(p, k)], w[(q, k)]);
                    w[(p, k)] = cs * wpk - sn * wqk;
                    w[(q, k)] = sn * wpk + cs * wqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
        let prev = off;
        off = off_diagonal(&w);
        sweeps += 1;
        if off >= prev && off <= loose {
            break;
        }
    }
    if off > loose {
        return Err(SpectraError::NoConvergence { algorithm: "Jacobi eigensolver", iterations: sweeps, residual: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].total_cmp(&w[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let cols: Vec<Vec<f64>> = order.iter().map(|&i| v.column(i)).collect();
    Ok(SymEigen { values, vectors: DenseMatrix::from_columns(&cols)? })
}

fn off_diagonal(w: &DenseMatrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[(i, j)] * w[(i, j)];
            }
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{mul, mul_tn, random_gaussian};

    #[test]
    fn diagonal_input() {
        let e = sym_eigen(&DenseMatrix::from_diag(&[1.0, 3.0, -2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0, -2.0]);
        assert_eq!(e.min_value(), -2.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_random_gram() {
        let g = random_gaussian(9, 7, 3);
        let a = mul_tn(&g, &g).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert!(e.vectors.orthonormality_defect() < 1e-12);
        let scaled = {
            let mut v = e.vectors.clone();
            v.scale_columns(&e.values);
            v
        };
        let recon = mul(&scaled, &e.vectors.transpose()).unwrap();
        assert!(recon.sub(&a).unwrap().frobenius_norm() < 1e-10 * a.frobenius_norm());
        assert!(e.min_value() > 0.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(sym_eigen(&a).is_err());
    }
}
