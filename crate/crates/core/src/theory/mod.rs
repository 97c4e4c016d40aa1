//! Step-size theory on frozen quadratic models: the mean-optimal learning
//! rate, its spike-variance upper bounds, and numerical checks of each link.

mod bounds;
mod instances;
mod model;

pub use bounds::{
    expected_quadratic_form, optimal_lr, spike_lr_bounds, spike_traces, surrogate_loss, SpikeBounds, SpikeTraces,
};
pub use instances::{
    monte_carlo_quadratic_form, pinch, random_instance, transfer_covariance, Instance, InstanceSpec,
    MonteCarloEstimate, HESSIAN_RIDGE,
};
pub use model::{QuadraticModel, SpikeProjector};

use serde::Serialize;

use crate::error::Result;

/// Points in the step-size grid used by the surrogate-minimization oracle.
pub const GRID_POINTS: usize = 10_000;

/// Checks on one instance. Slacks are relative to the quantity being bounded,
/// so negative values mean a violated inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstanceCheck {
    pub eta_star: f64,
    pub bounds: SpikeBounds,
    /// `(bound_mid - eta*) / eta*`.
    pub mid_slack: f64,
    /// `(bound_loose - bound_mid) / bound_mid`.
    pub loose_slack: f64,
    /// `(bound_mu - eta*) / eta*`.
    pub mu_slack: Option<f64>,
    /// `(tr(Sigma H) - tr(Sigma_s H)) / tr(Sigma H)`.
    pub trace_slack: f64,
    /// Distance from the grid argmin of the surrogate to `eta*`, in cells.
    pub grid_gap_cells: f64,
    /// `|tr(Pi Sigma Pi) - sum_i s_i^T Sigma s_i|`.
    pub identity_error: f64,
}

/// Grid argmin of the surrogate over `[0, hi]`, with the cell width.
pub fn grid_argmin(model: &QuadraticModel, hi: f64, points: usize) -> (f64, f64) {
    let cell = hi / (points - 1) as f64;
    let (mut best, mut best_val) = (0.0, f64::INFINITY);
    for i in 0..points {
        let eta = i as f64 * cell;
        let v = surrogate_loss(model, eta);
        if v < best_val {
            best = eta;
            best_val = v;
        }
    }
    (best, cell)
}

pub fn check_instance(model: &QuadraticModel, proj: &SpikeProjector) -> Result<InstanceCheck> {
    let eta_star = optimal_lr(model)?;
    let bounds = spike_lr_bounds(model, proj)?;
    let tr = model.trace_sigma_h();
    let (argmin, cell) = grid_argmin(model, 2.0 * bounds.mid.max(eta_star), GRID_POINTS);
    let direct: f64 = (0..proj.rank())
        .map(|i| {
            let s = proj.basis.column(i);
            QuadraticModel::bilinear(&model.sigma, &s, &s)
        })
        .sum();
    Ok(InstanceCheck {
        eta_star,
        bounds,
        mid_slack: (bounds.mid - eta_star) / eta_star,
        loose_slack: (bounds.loose - bounds.mid) / bounds.mid,
        mu_slack: bounds.mu.map(|b| (b - eta_star) / eta_star),
        trace_slack: if tr > 0.0 { (tr - bounds.traces.sigma_s_h) / tr } else { -bounds.traces.sigma_s_h },
        grid_gap_cells: (argmin - eta_star).abs() / cell,
        identity_error: (bounds.traces.sigma_s - direct).abs(),
    })
}

/// Aggregate over many instances.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryVerdict {
    pub instances: usize,
    pub eq1_gridgap_max: f64,
    pub eq2_min_slack: f64,
    pub eq3_min_slack: f64,
    pub trace_min_slack: f64,
    pub identity_max_error: f64,
    pub chain_violations: usize,
    pub pass: bool,
}

/// Tolerance on all slacks.
pub const SLACK_TOLERANCE: f64 = -1e-10;

pub fn summarize(checks: &[InstanceCheck]) -> TheoryVerdict {
    let fold_min = |f: &dyn Fn(&InstanceCheck) -> f64| checks.iter().map(f).fold(f64::INFINITY, f64::min);
    let eq1 = checks.iter().map(|c| c.grid_gap_cells).fold(0.0, f64::max);
    let eq2 = fold_min(&|c| c.mid_slack.min(c.loose_slack));
    let eq3 = fold_min(&|c| c.mu_slack.unwrap_or(f64::INFINITY));
    let trace = fold_min(&|c| c.trace_slack);
    let ident = checks.iter().map(|c| c.identity_error).fold(0.0, f64::max);
    let violations = checks
        .iter()
        .filter(|c| c.mid_slack.min(c.loose_slack).min(c.mu_slack.unwrap_or(0.0)) < SLACK_TOLERANCE)
        .count();
    TheoryVerdict {
        instances: checks.len(),
        eq1_gridgap_max: eq1,
        eq2_min_slack: eq2,
        eq3_min_slack: eq3,
        trace_min_slack: trace,
        identity_max_error: ident,
        chain_violations: violations,
        pass: eq1 <= 1.0 && eq2 >= SLACK_TOLERANCE && eq3 >= SLACK_TOLERANCE && ident <= 1e-10,
    }
}

/// Generate and check `count` random instances.
pub fn verify_random_instances(root: u64, count: usize, spec: &InstanceSpec) -> Result<TheoryVerdict> {
    let checks = (0..count as u64)
        .map(|i| {
            let inst = random_instance(root, i, spec)?;
            check_instance(&inst.model, &inst.proj)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    #[test]
    fn spike_supported_noise_makes_the_mid_bound_tight() {
        let proj = SpikeProjector::new(DenseMatrix::eye(5, 2)).unwrap();
        let sigma = transfer_covariance(&proj, 3.0, 1.0).unwrap();
        let h = DenseMatrix::from_diag(&[2.0, 1.0, 0.5, 0.5, 3.0]);
        let m = QuadraticModel::new(h, sigma, vec![1.0, -1.0, 0.0, 2.0, 0.0], 4, None).unwrap();
        let c = check_instance(&m, &proj).unwrap();
        assert!(c.mid_slack.abs() < 1e-14);
    }

    #[test]
    fn moving_noise_into_high_curvature_spike_lowers_the_optimum() {
        let d = 6;
        let proj = SpikeProjector::new(DenseMatrix::eye(d, 2)).unwrap();
        let h = DenseMatrix::from_diag(&[10.0, 8.0, 1.0, 1.0, 1.0, 1.0]);
        let gbar = vec![1.0, 0.5, 0.1, 0.0, 0.2, 0.0];
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let sigma = transfer_covariance(&proj, 4.0, i as f64 / 10.0).unwrap();
            let m = QuadraticModel::new(h.clone(), sigma, gbar.clone(), 2, None).unwrap();
            let eta = optimal_lr(&m).unwrap();
            assert!(eta < prev);
            prev = eta;
        }
    }

    #[test]
    fn trace_monotonicity_needs_structure() {
        // PSD pair whose noise and curvature are anti-correlated across the
        // spike boundary: projecting the noise onto the spike raises the trace.
        let proj = SpikeProjector::new(DenseMatrix::eye(2, 1)).unwrap();
        let sigma = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
        let m = QuadraticModel::new(h, sigma, vec![1.0, 0.0], 1, None).unwrap();
        let t = spike_traces(&m, &proj).unwrap();
        assert_eq!(m.trace_sigma_h(), 0.0);
        assert_eq!(t.sigma_s_h, 1.0);
    }
}
