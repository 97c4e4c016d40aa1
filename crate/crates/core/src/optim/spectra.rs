use serde::{Deserialize, Serialize};

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{gemm, DenseMatrix, FlopCounter, SvdFactors};
use crate::spectral::{power_iteration_svd, PowerIterConfig, SubspaceCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Spike rank as a fraction of `min(m, n)`.
    pub rank_ratio: f64,
    /// Power-iteration rounds per step.
    pub power_iters: usize,
    pub epsilon: f64,
    /// Target update RMS relative to `lr`.
    pub rms_scale: f64,
    pub oversample: usize,
    pub orthonormalize_v: bool,
    pub refresh_interval: usize,
    pub seed: u64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            momentum: 0.95,
            rank_ratio: 0.015,
            power_iters: 1,
            epsilon: 1e-8,
            rms_scale: 0.2,
            oversample: 8,
            orthonormalize_v: false,
            refresh_interval: 1,
            seed: 0,
        }
    }
}

impl SpectraConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SpectraError::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.rank_ratio > 0.0 && self.rank_ratio <= 1.0) {
            return bad(format!("rank_ratio must lie in (0, 1], got {}", self.rank_ratio));
        }
        if self.power_iters == 0 {
            return bad("power_iters must be >= 1".into());
        }
        if !(self.epsilon > 0.0) || !(self.rms_scale > 0.0) {
            return bad("epsilon and rms_scale must be positive".into());
        }
        if self.refresh_interval == 0 {
            return bad("refresh_interval must be >= 1".into());
        }
        Ok(())
    }

    fn power_config(&self, k: usize) -> PowerIterConfig {
        PowerIterConfig {
            k,
            iters: self.power_iters,
            oversample: self.oversample,
            seed: self.seed,
            orthonormalize_v: self.orthonormalize_v,
            refresh_interval: self.refresh_interval,
        }
    }
}

/// `max(1, round(ratio * min(m, n)))` with ties rounded to even.
pub fn spike_rank(rank_ratio: f64, rows: usize, cols: usize) -> usize {
    ((rank_ratio * rows.min(cols) as f64).round_ties_even() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraState {
    /// Momentum buffer.
    pub m: DenseMatrix,
    pub cache: SubspaceCache,
    pub k: usize,
    pub step: u64,
}

impl SpectraState {
    pub fn new(rows: usize, cols: usize, cfg: &SpectraConfig) -> Result<Self> {
        cfg.validate()?;
        let k = spike_rank(cfg.rank_ratio, rows, cols);
        if k >= rows.min(cols) {
            return Err(SpectraError::EmptyTail { rank: k, rows, cols });
        }
        Ok(Self { m: DenseMatrix::zeros(rows, cols), cache: SubspaceCache::new(), k, step: 0 })
    }

    /// Scalars held: momentum plus the cached `n x k` subspace.
    pub fn state_scalars(&self) -> usize {
        self.m.len() + self.cache.scalars()
    }
}

#[derive(Debug, Clone)]
pub struct SpectraStepInfo {
    pub sigma_tail: f64,
    /// RMS of the shaped update before rescaling.
    pub rms: f64,
    /// Multiplier applied to the shaped update.
    pub step_scale: f64,
    pub spike_scales: Vec<f64>,
    pub bootstrapped: bool,
    pub degenerate: bool,
    pub v_orthonormality_defect: f64,
}

/// Replace the spike singular values of `m_t` by the tail RMS scale:
/// returns `(O, sigma_tail)` with `O = M_tail + sigma_tail * U V^T` and
/// `M_tail = M_t - U diag(s) V^T`.
pub fn shape_update(m_t: &DenseMatrix, factors: &SvdFactors, flops: &FlopCounter) -> Result<(DenseMatrix, f64)> {
    let (rows, cols) = m_t.shape();
    let k = factors.rank();
    let r = rows.min(cols);
    if k >= r {
        return Err(SpectraError::EmptyTail { rank: k, rows, cols });
    }
    let mut o = m_t.clone();
    let mut us = factors.u.clone();
    us.scale_columns(&factors.s);
    gemm(-1.0, &us, false, &factors.v, true, 1.0, &mut o, flops)?;
    let sigma_tail = (o.frobenius_norm_sq() / (r - k) as f64).sqrt();
    gemm(sigma_tail, &factors.u, false, &factors.v, true, 1.0, &mut o, flops)?;
    Ok((o, sigma_tail))
}

/// One Spectra step: momentum accumulation, spike estimation, spike
/// shrinking to the tail scale and an RMS-calibrated update of `w`.
pub fn spectra_step(
    w: &mut DenseMatrix,
    g: &DenseMatrix,
    state: &mut SpectraState,
    cfg: &SpectraConfig,
    flops: &FlopCounter,
) -> Result<SpectraStepInfo> {
    if w.shape() != g.shape() || w.shape() != state.m.shape() {
        return Err(SpectraError::DimensionMismatch {
            op: "spectra_step",
            left: shape(w.rows(), w.cols()),
            right: format!("grad {} / momentum {}", shape(g.rows(), g.cols()), shape(state.m.rows(), state.m.cols())),
        });
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("spectra_step gradient"));
    }
    state.m.scale(cfg.momentum);
    state.m.axpy(1.0, g)?;

    let out = power_iteration_svd(&state.m, &cfg.power_config(state.k), &mut state.cache, flops)?;
    let (o, sigma_tail) = shape_update(&state.m, &out.factors, flops)?;
    let rms = o.rms();
    let step_scale = cfg.rms_scale * cfg.lr / (rms + cfg.epsilon);
    w.axpy(-step_scale, &o)?;
    state.step += 1;
    Ok(SpectraStepInfo {
        sigma_tail,
        rms,
        step_scale,
        spike_scales: out.factors.s,
        bootstrapped: out.bootstrapped,
        degenerate: out.degenerate,
        v_orthonormality_defect: out.v_orthonormality_defect,
    })
}
