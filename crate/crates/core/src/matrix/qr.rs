use super::{DenseMatrix, FlopCounter};
use crate::error::{Result, SpectraError};

/// Relative column-norm threshold below which a column is treated as
/// linearly dependent on its predecessors.
pub const RANK_TOLERANCE: f64 = 1e-14;

/// Output of [`thin_qr`].
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `m x k`, orthonormal columns.
    pub q: DenseMatrix,
    /// `k x k`, upper triangular with nonnegative diagonal.
    pub r: DenseMatrix,
    /// Columns whose residual norm fell below `RANK_TOLERANCE * ||A||_F`.
    /// The matching columns of `q` are deterministic completion directions.
    pub deficient_columns: Vec<usize>,
}

impl QrFactors {
    pub fn is_rank_deficient(&self) -> bool {
        !self.deficient_columns.is_empty()
    }
}

/// Operation count charged by [`thin_qr`] for an `m x k` input.
pub fn thin_qr_flops(m: usize, k: usize) -> u64 {
    let (m, k) = (m as u64, k as u64);
    (0..k)
        .map(|j| {
            let h = m - j;
            // reflector construction, trailing update, and forming Q
            2 * h + 4 * h * (k - j - 1) + 4 * h * (k - j)
        })
        .sum()
}

/// Householder thin QR of a tall matrix (`rows >= cols`).
pub fn thin_qr(a: &DenseMatrix, flops: &FlopCounter) -> Result<QrFactors> {
    let (m, k) = a.shape();
    if m < k {
        return Err(SpectraError::InvalidArgument(format!("thin_qr needs rows >= cols, got {m}x{k}")));
    }
    if !a.is_finite() {
        return Err(SpectraError::NonFinite("thin_qr"));
    }
    let threshold = RANK_TOLERANCE * a.frobenius_norm();

    // Column-major working copy: cols[j] is column j of A.
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
    let mut r = DenseMatrix::zeros(k, k);
    let mut deficient = Vec::new();

    for j in 0..k {
        let x = &cols[j][j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= threshold {
            deficient.push(j);
            for (i, c) in cols.iter().enumerate().skip(j) {
                r[(j, i)] = c[j];
            }
            r[(j, j)] = 0.0;
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= vnorm);

        r[(j, j)] = alpha;
        for i in (j + 1)..k {
            let col = &mut cols[i][j..];
            let d: f64 = col.iter().zip(&v).map(|(c, w)| c * w).sum();
            for (c, w) in col.iter_mut().zip(&v) {
                *c -= 2.0 * d * w;
            }
            r[(j, i)] = col[0];
        }
        reflectors.push(Some(v));
    }

    // Q = H_0 H_1 ... H_{k-1} [I_k; 0], applied right to left.
    let mut qcols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for j in (0..k).rev() {
        if let Some(v) = &reflectors[j] {
            for qc in qcols.iter_mut().skip(j) {
                let seg = &mut qc[j..];
                let d: f64 = seg.iter().zip(v).map(|(c, w)| c * w).sum();
                for (c, w) in seg.iter_mut().zip(v) {
                    *c -= 2.0 * d * w;
                }
            }
        }
    }

    // Sign convention: nonnegative diagonal of R.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in j..k {
                r[(j, i)] = -r[(j, i)];
            }
            qcols[j].iter_mut().for_each(|t| *t = -*t);
        }
    }

    flops.add(thin_qr_flops(m, k));
    Ok(QrFactors { q: DenseMatrix::from_columns(&qcols)?, r, deficient_columns: deficient })
}
