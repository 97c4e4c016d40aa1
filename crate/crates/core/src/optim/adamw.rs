use serde::{Deserialize, Serialize};

use crate::error::{shape, Result, SpectraError};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 0.0 }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(SpectraError::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(SpectraError::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) || self.weight_decay < 0.0 {
            return Err(SpectraError::InvalidArgument("epsilon must be positive and weight_decay nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: DenseMatrix,
    /// Elementwise second moment.
    pub v: DenseMatrix,
    pub t: u64,
}

impl AdamWState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { m: DenseMatrix::zeros(rows, cols), v: DenseMatrix::zeros(rows, cols), t: 0 }
    }

    pub fn state_scalars(&self) -> usize {
        self.m.len() + self.v.len()
    }
}

/// Bias-corrected AdamW with decoupled decay `W <- W (1 - lr * wd)` applied
/// before the normalized step.
pub fn adamw_step(w: &mut DenseMatrix, g: &DenseMatrix, state: &mut AdamWState, cfg: &AdamWConfig) -> Result<()> {
    if w.shape() != g.shape() || w.shape() != state.m.shape() {
        return Err(SpectraError::DimensionMismatch {
            op: "adamw_step",
            left: shape(w.rows(), w.cols()),
            right: shape(g.rows(), g.cols()),
        });
    }
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("adamw_step gradient"));
    }
    state.t += 1;
    let t = state.t.min(i32::MAX as u64) as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let w_data = w.data_mut();
    let m_data = state.m.data_mut();
    let v_data = state.v.data_mut();
    for (i, &gi) in g.data().iter().enumerate() {
        m_data[i] = b1 * m_data[i] + (1.0 - b1) * gi;
        v_data[i] = b2 * v_data[i] + (1.0 - b2) * gi * gi;
        let mhat = m_data[i] / c1;
        let vhat = v_data[i] / c2;
        w_data[i] = w_data[i] * decay - cfg.lr * mhat / (vhat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays() {
        let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.5, ..Default::default() };
        let mut w = DenseMatrix::from_rows(&[&[2.0, -4.0]]).unwrap();
        let mut st = AdamWState::new(1, 2);
        adamw_step(&mut w, &DenseMatrix::zeros(1, 2), &mut st, &cfg).unwrap();
        assert_eq!(w.data(), &[2.0 * 0.95, -4.0 * 0.95]);
    }

    #[test]
    fn sign_like_limit_without_averaging() {
        let cfg = AdamWConfig { lr: 0.01, beta1: 0.0, beta2: 0.0, ..Default::default() };
        let g = DenseMatrix::from_rows(&[&[3.0, -0.5]]).unwrap();
        let mut w = DenseMatrix::zeros(1, 2);
        let mut st = AdamWState::new(1, 2);
        for _ in 0..10 {
            adamw_step(&mut w, &g, &mut st, &cfg).unwrap();
        }
        assert!((w[(0, 0)] + 0.1).abs() < 1e-8);
        assert!((w[(0, 1)] - 0.1).abs() < 1e-8);
    }

    #[test]
    fn scalar_recurrence_three_steps() {
        let cfg = AdamWConfig { lr: 0.05, ..Default::default() };
        let grads = [0.3, -1.2, 0.7];
        let mut w = DenseMatrix::from_rows(&[&[1.0]]).unwrap();
        let mut st = AdamWState::new(1, 1);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, &gv) in grads.iter().enumerate() {
            adamw_step(&mut w, &DenseMatrix::from_rows(&[&[gv]]).unwrap(), &mut st, &cfg).unwrap();
            m = 0.9 * m + 0.1 * gv;
            v = 0.999 * v + 0.001 * gv * gv;
            let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= 0.05 * mh / (vh.sqrt() + 1e-8);
            assert!((w[(0, 0)] - x).abs() < 1e-12);
        }
        assert!(st.v.data().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        let mut w = DenseMatrix::zeros(1, 1);
        let mut st = AdamWState::new(1, 1);
        let g = DenseMatrix::from_vec_unchecked(1, 1, vec![f64::INFINITY]);
        assert!(adamw_step(&mut w, &g, &mut st, &AdamWConfig::default()).is_err());
    }
}
