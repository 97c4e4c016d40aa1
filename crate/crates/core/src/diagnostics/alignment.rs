use serde::Serialize;

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{exact_svd, mul_tn, DenseMatrix, FlopCounter};
use crate::spectral::{newton_schulz_with, NsConfig};

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    /// `align[i] = max_j |<v_i, v_hat_j>|`, ordered by the singular values of
    /// the input.
    pub align: Vec<f64>,
}

impl AlignmentReport {
    /// Mean over the leading `ceil(frac * r)` directions (at least one).
    pub fn head_mean(&self, frac: f64) -> f64 {
        let n = count(frac, self.align.len());
        self.align[..n].iter().sum::<f64>() / n as f64
    }

    /// Mean over the trailing `ceil(frac * r)` directions (at least one).
    pub fn tail_mean(&self, frac: f64) -> f64 {
        let n = count(frac, self.align.len());
        self.align[self.align.len() - n..].iter().sum::<f64>() / n as f64
    }
}

fn count(frac: f64, len: usize) -> usize {
    ((frac * len as f64).ceil() as usize).clamp(1, len)
}

/// Per-direction alignment of right singular vectors before and after
/// Newton–Schulz with `steps` iterations in 64-bit arithmetic.
pub fn ns_alignment(g: &DenseMatrix, steps: usize) -> Result<AlignmentReport> {
    ns_alignment_with(g, &NsConfig { steps, ..NsConfig::default() })
}

/// As [`ns_alignment`] with explicit coefficients and arithmetic precision.
pub fn ns_alignment_with(g: &DenseMatrix, cfg: &NsConfig) -> Result<AlignmentReport> {
    let out = newton_schulz_with(g, cfg, &FlopCounter::new())?;
    let v = exact_svd(g)?.v;
    let v_hat = exact_svd(&out)?.v;
    Ok(AlignmentReport { align: max_abs_overlap(&v, &v_hat)? })
}

/// `max_j |<a_i, b_j>|` for every column `a_i`.
pub fn max_abs_overlap(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(SpectraError::DimensionMismatch {
            op: "max_abs_overlap",
            left: shape(a.rows(), a.cols()),
            right: shape(b.rows(), b.cols()),
        });
    }
    let c = mul_tn(a, b)?;
    Ok((0..c.rows()).map(|i| c.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs())).min(1.0)).collect())
}
