use serde::Serialize;

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{exact_svd, DenseMatrix};

/// `(M_s, M_t)` with `M_s` the best rank-`k` approximation and
/// `M_t = M - M_s`.
pub fn spike_tail_split(m: &DenseMatrix, k: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let r = m.rows().min(m.cols());
    if k == 0 || k >= r {
        return Err(SpectraError::InvalidArgument(format!(
            "split rank k = {k} must lie in 1..{r} for a {} matrix",
            shape(m.rows(), m.cols())
        )));
    }
    let spike = exact_svd(m)?.truncate(k).reconstruct();
    let tail = m.sub(&spike)?;
    Ok((spike, tail))
}

/// Elementwise tail-update magnitudes under two normalizers.
#[derive(Debug, Clone, Serialize)]
pub struct TailSuppression {
    /// `|M_t| / (sqrt(V_s + V_t) + eps)`.
    pub full: Vec<f64>,
    /// `|M_t| / (sqrt(V_t) + eps)`.
    pub tail_only: Vec<f64>,
    /// Entries clamped to zero before the square root.
    pub clamped: usize,
    /// Some clamped entry was below `-1e-12`.
    pub flagged: bool,
}

impl TailSuppression {
    /// Median over entries of `tail_only / full`, skipping zero numerators.
    pub fn median_suppression(&self) -> f64 {
        let mut ratios: Vec<f64> =
            self.full.iter().zip(&self.tail_only).filter(|(f, _)| **f > 0.0).map(|(f, t)| t / f).collect();
        median(&mut ratios)
    }
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Compare tail magnitudes normalized by the full second moment against
/// normalization by its tail part alone.
pub fn tail_suppression_parts(
    m_t: &DenseMatrix,
    v_s: &DenseMatrix,
    v_t: &DenseMatrix,
    eps: f64,
) -> Result<TailSuppression> {
    if m_t.shape() != v_s.shape() || m_t.shape() != v_t.shape() {
        return Err(SpectraError::DimensionMismatch {
            op: "tail_suppression",
            left: shape(m_t.rows(), m_t.cols()),
            right: shape(v_s.rows(), v_s.cols()),
        });
    }
    let mut clamped = 0;
    let mut flagged = false;
    let mut clamp = |x: f64| {
        if x < 0.0 {
            clamped += 1;
            flagged |= x < -1e-12;
            0.0
        } else {
            x
        }
    };
    let n = m_t.len();
    let mut full = Vec::with_capacity(n);
    let mut tail_only = Vec::with_capacity(n);
    for i in 0..n {
        let mt = m_t.data()[i].abs();
        let vs = v_s.data()[i];
        let vt = v_t.data()[i];
        let total = clamp(vs + vt);
        let tail = clamp(vt);
        full.push(mt / (total.sqrt() + eps));
        tail_only.push(mt / (tail.sqrt() + eps));
    }
    Ok(TailSuppression { full, tail_only, clamped, flagged })
}

/// Split both the first moment `m` and the elementwise second moment `v` at
/// rank `k` and compare the two tail normalizations.
pub fn tail_suppression(m: &DenseMatrix, v: &DenseMatrix, k: usize, eps: f64) -> Result<TailSuppression> {
    if v.data().iter().any(|&x| x < 0.0) {
        return Err(SpectraError::InvalidArgument("second moment must be elementwise nonnegative".into()));
    }
    let (_, m_t) = spike_tail_split(m, k)?;
    let (v_s, v_t) = spike_tail_split(v, k)?;
    tail_suppression_parts(&m_t, &v_s, &v_t, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_gaussian;

    #[test]
    fn diagonal_split() {
        let (s, t) = spike_tail_split(&DenseMatrix::from_diag(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert!(s.sub(&DenseMatrix::from_diag(&[3.0, 0.0, 0.0])).unwrap().frobenius_norm() < 1e-14);
        assert!(t.sub(&DenseMatrix::from_diag(&[0.0, 2.0, 1.0])).unwrap().frobenius_norm() < 1e-14);
        assert!(spike_tail_split(&DenseMatrix::identity(3), 3).is_err());
    }

    #[test]
    fn tail_energy_matches_spectrum() {
        let m = random_gaussian(9, 7, 3);
        let (s, t) = spike_tail_split(&m, 2).unwrap();
        let sig = exact_svd(&m).unwrap().s;
        let want: f64 = sig[2..].iter().map(|x| x * x).sum();
        assert!((t.frobenius_norm_sq() - want).abs() < 1e-10 * want);
        assert!(s.add(&t).unwrap().sub(&m).unwrap().frobenius_norm() <= 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn no_spike_gives_identical_quotients() {
        let mt = random_gaussian(4, 4, 1);
        let vt = random_gaussian(4, 4, 2).map(|x| x * x);
        let r = tail_suppression_parts(&mt, &DenseMatrix::zeros(4, 4), &vt, 1e-8).unwrap();
        assert_eq!(r.full, r.tail_only);
    }

    #[test]
    fn spike_dominated_denominator() {
        let mt = random_gaussian(6, 6, 1);
        let vt = random_gaussian(6, 6, 2).map(|x| x * x + 0.1);
        let vs = vt.scaled(1e4);
        let r = tail_suppression_parts(&mt, &vs, &vt, 1e-12).unwrap();
        let med = r.median_suppression();
        assert!((med - 100.0).abs() < 0.1, "{med}");
    }

    #[test]
    fn epsilon_floor_and_clamping() {
        let mt = DenseMatrix::from_rows(&[&[2.0, 3.0]]).unwrap();
        let vs = DenseMatrix::from_rows(&[&[0.0, -1e-15]]).unwrap();
        let vt = DenseMatrix::zeros(1, 2);
        let r = tail_suppression_parts(&mt, &vs, &vt, 1e-3).unwrap();
        assert_eq!(r.full, vec![2000.0, 3000.0]);
        assert_eq!(r.tail_only, r.full);
        assert_eq!(r.clamped, 1);
        assert!(!r.flagged);
        let vs = DenseMatrix::from_rows(&[&[0.0, -1.0]]).unwrap();
        assert!(tail_suppression_parts(&mt, &vs, &vt, 1e-3).unwrap().flagged);
    }
}
