use serde::{Deserialize, Serialize};

use crate::error::{shape, Result, SpectraError};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { lr: 1e-2, momentum: 0.9 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(SpectraError::InvalidArgument("sgd needs lr > 0 and momentum in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub m: DenseMatrix,
}

impl SgdState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { m: DenseMatrix::zeros(rows, cols) }
    }

    pub fn state_scalars(&self) -> usize {
        self.m.len()
    }
}

/// Heavy-ball SGD: `M <- mu M + G`, `W <- W - lr M`.
pub fn sgd_step(w: &mut DenseMatrix, g: &DenseMatrix, state: &mut SgdState, cfg: &SgdConfig) -> Result<()> {
    if w.shape() != g.shape() || w.shape() != state.m.shape() {
        return Err(SpectraError::DimensionMismatch {
            op: "sgd_step",
            left: shape(w.rows(), w.cols()),
            right: shape(g.rows(), g.cols()),
        });
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("sgd_step gradient"));
    }
    state.m.scale(cfg.momentum);
    state.m.axpy(1.0, g)?;
    w.axpy(-cfg.lr, &state.m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavy_ball_recurrence() {
        let cfg = SgdConfig { lr: 0.1, momentum: 0.5 };
        let mut w = DenseMatrix::zeros(1, 1);
        let mut st = SgdState::new(1, 1);
        let g = DenseMatrix::from_rows(&[&[1.0]]).unwrap();
        sgd_step(&mut w, &g, &mut st, &cfg).unwrap();
        sgd_step(&mut w, &g, &mut st, &cfg).unwrap();
        // m = 1 then 1.5; w = -0.1 - 0.15
        assert!((w[(0, 0)] + 0.25).abs() < 1e-15);
    }
}
