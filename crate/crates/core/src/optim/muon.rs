use serde::{Deserialize, Serialize};

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{DenseMatrix, FlopCounter};
use crate::spectral::{newton_schulz_with, NsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuonConfig {
    pub lr: f64,
    pub momentum: f64,
    pub ns: NsConfig,
    /// Same RMS calibration as Spectra so the two differ only in shaping.
    pub rms_scale: f64,
    pub epsilon: f64,
    /// Apply `lr * NS(M)` without the RMS rescale.
    pub raw_step: bool,
}

impl Default for MuonConfig {
    fn default() -> Self {
        Self { lr: 1e-3, momentum: 0.95, ns: NsConfig::default(), rms_scale: 0.2, epsilon: 1e-8, raw_step: false }
    }
}

impl MuonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(SpectraError::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(SpectraError::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if self.ns.steps == 0 {
            return Err(SpectraError::InvalidArgument("ns.steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuonState {
    pub m: DenseMatrix,
}

impl MuonState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { m: DenseMatrix::zeros(rows, cols) }
    }

    pub fn state_scalars(&self) -> usize {
        self.m.len()
    }
}

/// `M <- mu M + G`, then step along `NS(M)`. Returns the applied update
/// norm; a zero momentum leaves `w` untouched.
pub fn muon_step(
    w: &mut DenseMatrix,
    g: &DenseMatrix,
    state: &mut MuonState,
    cfg: &MuonConfig,
    flops: &FlopCounter,
) -> Result<f64> {
    if w.shape() != g.shape() || w.shape() != state.m.shape() {
        return Err(SpectraError::DimensionMismatch {
            op: "muon_step",
            left: shape(w.rows(), w.cols()),
            right: shape(g.rows(), g.cols()),
        });
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("muon_step gradient"));
    }
    state.m.scale(cfg.momentum);
    state.m.axpy(1.0, g)?;
    if state.m.is_zero() {
        return Ok(0.0);
    }
    let o = newton_schulz_with(&state.m, &cfg.ns, flops)?;
    let scale = if cfg.raw_step { cfg.lr } else { cfg.rms_scale * cfg.lr / (o.rms() + cfg.epsilon) };
    w.axpy(-scale, &o)?;
    Ok(scale * o.frobenius_norm())
}
