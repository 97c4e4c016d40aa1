//! Exact singular value decomposition by one-sided Jacobi rotations.
//!
//! This is the reference every approximate routine in the crate is checked
//! against, so it favours accuracy over speed: rotations are applied until
//! every column pair is orthogonal to `OFF_DIAGONAL_TOLERANCE` relative to the
//! column norms.

use super::{low_rank_product, DenseMatrix, FlopCounter};
use crate::error::{shape, Result, SpectraError};

/// Relative pairwise-orthogonality threshold that ends the sweeps.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Largest dimension accepted by [`exact_svd`].
pub const MAX_DIMENSION: usize = 4096;

/// Rank-`k` factors `U diag(s) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `m x k` left factor.
    pub u: DenseMatrix,
    /// `k` nonnegative scales in descending order.
    pub s: Vec<f64>,
    /// `n x k` right factor.
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(s) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        low_rank_product(&self.u, &self.s, &self.v, &FlopCounter::new()).expect("factor shapes agree by construction")
    }

    /// Keep the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactors {
        let k = k.clamp(1, self.rank());
        SvdFactors { u: self.u.leading_columns(k), s: self.s[..k].to_vec(), v: self.v.leading_columns(k) }
    }

    /// Worst of `||U^T U - I||_F` and `||V^T V - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        self.u.orthonormality_defect().max(self.v.orthonormality_defect())
    }
}

/// Full thin SVD with `r = min(m, n)` triplets.
///
/// Singular values are sorted descending and each left vector is signed so
/// that its largest-magnitude entry is positive.
pub fn exact_svd(a: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m.max(n) > MAX_DIMENSION {
        return Err(SpectraError::InvalidArgument(format!(
            "exact_svd is limited to dimensions <= {MAX_DIMENSION}, got {}",
            shape(m, n)
        )));
    }
    if !a.is_finite() {
        return Err(SpectraError::NonFinite("exact_svd"));
    }
    if m >= n {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        let mut f = SvdFactors { u: t.v, s: t.s, v: t.u };
        apply_sign_convention(&mut f);
        Ok(f)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn pair_mut(buf: &mut [f64], len: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * len);
    (&mut head[p * len..(p + 1) * len], &mut tail[..len])
}

fn jacobi_tall(a: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    // cols[j*m..(j+1)*m] holds column j of the working matrix A V.
    let mut cols = a.transpose().into_vec();
    let mut vcols = DenseMatrix::identity(n).into_vec();
    let max_sweeps = 100 * n.max(1);

    let mut converged = n < 2;
    let mut worst = 0.0;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut norms: Vec<f64> = cols.chunks_exact(m).map(|c| dot(c, c)).collect();
        let mut rotated = false;
        worst = 0.0f64;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (cp, cq) = pair_mut(&mut cols, m, p, q);
                let gamma = dot(cp, cq);
                let off = gamma.abs() / (alpha * beta).sqrt();
                worst = worst.max(off);
                if off <= OFF_DIAGONAL_TOLERANCE {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                let (vp, vq) = pair_mut(&mut vcols, n, p, q);
                rotate(vp, vq, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(SpectraError::NoConvergence {
            algorithm: "one-sided Jacobi SVD",
            iterations: max_sweeps,
            residual: worst,
        });
    }

    let sigmas: Vec<f64> = cols.chunks_exact(m).map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigmas[j].total_cmp(&sigmas[i]).then(i.cmp(&j)));

    let smax = sigmas.iter().cloned().fold(0.0, f64::max);
    let negligible = smax * (m as f64) * f64::EPSILON;

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        let c = &cols[j * m..(j + 1) * m];
        if sigmas[j] > negligible && sigmas[j] > 0.0 {
            ucols.push(c.iter().map(|x| x / sigmas[j]).collect());
        } else {
            ucols.push(vec![0.0; m]);
            deficient.push(pos);
        }
    }
    complete_orthonormal(&mut ucols, &deficient);

    let s: Vec<f64> = order.iter().map(|&j| sigmas[j]).collect();
    let vsorted: Vec<Vec<f64>> = order.iter().map(|&j| vcols[j * n..(j + 1) * n].to_vec()).collect();
    let mut f = SvdFactors { u: DenseMatrix::from_columns(&ucols)?, s, v: DenseMatrix::from_columns(&vsorted)? };
    apply_sign_convention(&mut f);
    Ok(f)
}

/// Fill the listed (zeroed) columns with unit vectors orthogonal to every
/// other column, scanning the standard basis in order.
fn complete_orthonormal(columns: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = columns[0].len();
    let mut candidate = 0usize;
    for &slot in missing {
        loop {
            assert!(candidate < 2 * m + columns.len(), "orthogonal completion exhausted");
            let mut e = vec![0.0; m];
            e[candidate % m] = 1.0;
            candidate += 1;
            // Two Gram-Schmidt passes for stability.
            for _ in 0..2 {
                for (idx, c) in columns.iter().enumerate() {
                    if idx == slot || c.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let d = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                columns[slot] = e;
                break;
            }
        }
    }
}

fn apply_sign_convention(f: &mut SvdFactors) {
    for j in 0..f.s.len() {
        let col = f.u.column(j);
        let mut best = 0usize;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            f.u.set_column(j, &col.iter().map(|x| -x).collect::<Vec<_>>());
            let vc = f.v.column(j);
            f.v.set_column(j, &vc.iter().map(|x| -x).collect::<Vec<_>>());
        }
    }
}
