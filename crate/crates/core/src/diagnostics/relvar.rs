use serde::Serialize;

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{exact_svd, mul, DenseMatrix};

/// One row of `relvar.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct RelVarEntry {
    /// 1-based direction index.
    pub k: usize,
    pub sigma_k: f64,
    pub var_a_k: f64,
    pub relvar_k: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelVarReport {
    pub entries: Vec<RelVarEntry>,
    /// 1-based indices skipped because `sigma_k` is zero.
    pub excluded: Vec<usize>,
    pub samples: usize,
    pub micro_batch: usize,
}

impl RelVarReport {
    pub fn relvars(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.relvar_k).collect()
    }
}

/// Per-direction `Var_i(u_k^T G_i v_k) / sigma_k^2` in the fixed singular
/// basis of `gbar`, using the unbiased sample variance.
pub fn relvar(gbar: &DenseMatrix, samples: &[DenseMatrix], micro_batch: usize) -> Result<RelVarReport> {
    if samples.len() < 2 {
        return Err(SpectraError::InvalidArgument("relvar needs at least two samples".into()));
    }
    if gbar.is_zero() {
        return Err(SpectraError::Degenerate("relvar reference gradient is zero".into()));
    }
    let basis = exact_svd(gbar)?;
    let r = basis.rank();
    let cutoff = basis.s[0] * 1e-12;
    let mut proj = vec![Vec::with_capacity(samples.len()); r];
    for g in samples {
        if g.shape() != gbar.shape() {
            return Err(SpectraError::DimensionMismatch {
                op: "relvar",
                left: shape(gbar.rows(), gbar.cols()),
                right: shape(g.rows(), g.cols()),
            });
        }
        let gv = mul(g, &basis.v)?;
        for (k, p) in proj.iter_mut().enumerate() {
            p.push((0..gbar.rows()).map(|i| basis.u[(i, k)] * gv[(i, k)]).sum::<f64>());
        }
    }
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    for (k, a) in proj.iter().enumerate() {
        let sigma = basis.s[k];
        if sigma <= cutoff {
            excluded.push(k + 1);
            continue;
        }
        let var = unbiased_variance(a);
        entries.push(RelVarEntry { k: k + 1, sigma_k: sigma, var_a_k: var, relvar_k: var / (sigma * sigma) });
    }
    Ok(RelVarReport { entries, excluded, samples: samples.len(), micro_batch })
}

pub fn unbiased_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            out[t] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}
