use serde::Serialize;

use super::model::{QuadraticModel, SpikeProjector};
use crate::error::{Result, SpectraError};

/// `E[g^T H g] = gbar^T H gbar + tr(Sigma H) / B` for `g ~ N(gbar, Sigma / B)`.
pub fn expected_quadratic_form(model: &QuadraticModel) -> f64 {
    model.gbar_h_gbar() + model.trace_sigma_h() / model.batch as f64
}

/// Mean-optimal step size minimizing the quadratic surrogate.
pub fn optimal_lr(model: &QuadraticModel) -> Result<f64> {
    let den = expected_quadratic_form(model);
    if !(den > 0.0) {
        return Err(SpectraError::Degenerate(
            "optimal learning rate undefined: expected curvature along the step is zero".into(),
        ));
    }
    Ok(model.gbar_norm_sq() / den)
}

/// Second-order surrogate of the expected post-step loss, with `L_0 = 0`.
pub fn surrogate_loss(model: &QuadraticModel, eta: f64) -> f64 {
    -eta * model.gbar_norm_sq() + 0.5 * eta * eta * expected_quadratic_form(model)
}

/// Projected traces appearing in the spike bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpikeTraces {
    /// `tr(Pi Sigma Pi H)`.
    pub sigma_s_h: f64,
    /// `tr(Pi Sigma Pi) = sum_i s_i^T Sigma s_i`.
    pub sigma_s: f64,
}

/// Both traces from the `k x k` blocks `S^T Sigma S` and `S^T H S`.
pub fn spike_traces(model: &QuadraticModel, proj: &SpikeProjector) -> Result<SpikeTraces> {
    if proj.basis.rows() != model.dim() {
        return Err(SpectraError::DimensionMismatch {
            op: "spike_traces",
            left: format!("model of dimension {}", model.dim()),
            right: format!("basis of dimension {}", proj.basis.rows()),
        });
    }
    let ss = proj.project(&model.sigma)?;
    let hs = proj.project(&model.h)?;
    let k = proj.rank();
    let mut sigma_s_h = 0.0;
    for i in 0..k {
        for j in 0..k {
            sigma_s_h += ss[(i, j)] * hs[(j, i)];
        }
    }
    Ok(SpikeTraces { sigma_s_h, sigma_s: ss.trace() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpikeBounds {
    pub mid: f64,
    /// `+inf` when the spike carries no curvature-weighted variance.
    pub loose: f64,
    pub mu: Option<f64>,
    pub traces: SpikeTraces,
}

/// Upper bounds on the optimal step size in terms of spike-projected noise.
pub fn spike_lr_bounds(model: &QuadraticModel, proj: &SpikeProjector) -> Result<SpikeBounds> {
    let traces = spike_traces(model, proj)?;
    let b = model.batch as f64;
    let g2 = model.gbar_norm_sq();
    let mid_den = model.gbar_h_gbar() + traces.sigma_s_h / b;
    if !(mid_den > 0.0) {
        return Err(SpectraError::Degenerate("spike bound undefined: zero denominator".into()));
    }
    let loose = if traces.sigma_s_h > 0.0 { b * g2 / traces.sigma_s_h } else { f64::INFINITY };
    let mu = model.mu_lb.map(|mu| if traces.sigma_s > 0.0 { b * g2 / (mu * traces.sigma_s) } else { f64::INFINITY });
    Ok(SpikeBounds { mid: g2 / mid_den, loose, mu, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn model(h: &[f64], sigma: &[f64], gbar: Vec<f64>, b: usize) -> QuadraticModel {
        QuadraticModel::new(DenseMatrix::from_diag(h), DenseMatrix::from_diag(sigma), gbar, b, None).unwrap()
    }

    #[test]
    fn noiseless_isotropic() {
        let m = model(&[1.0; 3], &[0.0; 3], vec![0.3, -2.0, 1.0], 4);
        assert!((optimal_lr(&m).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(expected_quadratic_form(&m), m.gbar_norm_sq());
    }

    #[test]
    fn hand_evaluated_step() {
        let m = model(&[1.0, 2.0], &[4.0, 0.0], vec![1.0, 0.0], 1);
        assert!((optimal_lr(&m).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn flat_model_is_degenerate() {
        let m = model(&[0.0, 0.0], &[1.0, 1.0], vec![1.0, 0.0], 1);
        assert!(optimal_lr(&m).is_err());
    }

    #[test]
    fn surrogate_is_a_parabola_around_the_optimum() {
        let m = model(&[1.0, 3.0], &[2.0, 0.5], vec![1.0, 1.0], 2);
        let eta = optimal_lr(&m).unwrap();
        assert_eq!(surrogate_loss(&m, 0.0), 0.0);
        assert!(surrogate_loss(&m, 2.0 * eta).abs() < 1e-12);
        let h = 1e-6 * eta;
        assert!(surrogate_loss(&m, eta - h) > surrogate_loss(&m, eta));
        assert!(surrogate_loss(&m, eta + h) > surrogate_loss(&m, eta));
    }

    #[test]
    fn identity_covariance_chain() {
        let m = model(&[1.0; 4], &[1.0; 4], vec![2.0, 0.0, 0.0, 1.0], 3);
        let p =
            SpikeProjector::from_gradient(&DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap(), 1).unwrap();
        let b = spike_lr_bounds(&m, &p).unwrap();
        let eta = optimal_lr(&m).unwrap();
        assert!(eta <= b.mid && b.mid <= b.loose);
        // tr(Sigma_s H) = 1, so mid = 5 / (5 + 1/3).
        assert!((b.mid - 5.0 / (5.0 + 1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_spike_variance_gives_infinite_loose_bound() {
        let m = model(&[1.0; 4], &[0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], 1);
        let p = SpikeProjector::new(DenseMatrix::eye(4, 1)).unwrap();
        assert!(spike_lr_bounds(&m, &p).unwrap().loose.is_infinite());
    }
}
