use crate::error::{Result, SpectraError};
use crate::matrix::{exact_svd, sym_eigen, DenseMatrix};

/// Frozen second-order model of one SGD step: Hessian `h`, per-sample
/// gradient covariance `sigma` (so `Cov(g) = sigma / batch`), mean gradient
/// `gbar`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub h: DenseMatrix,
    pub sigma: DenseMatrix,
    pub gbar: Vec<f64>,
    pub batch: usize,
    /// Optional lower curvature bound with `H >= mu I`.
    pub mu_lb: Option<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

fn check_psd(name: &str, a: &DenseMatrix) -> Result<f64> {
    let (r, c) = a.shape();
    if r != c {
        return Err(SpectraError::InvalidArgument(format!("{name} must be square, got {r}x{c}")));
    }
    let scale = a.max_abs().max(1.0);
    if a.asymmetry() > SYMMETRY_TOL * scale {
        return Err(SpectraError::InvalidArgument(format!(
            "{name} is not symmetric (asymmetry {:.3e})",
            a.asymmetry()
        )));
    }
    let lmin = sym_eigen(a)?.min_value();
    if lmin < -PSD_TOL * scale {
        return Err(SpectraError::InvalidArgument(format!("{name} is not PSD (min eigenvalue {lmin:.3e})")));
    }
    Ok(lmin.max(0.0))
}

impl QuadraticModel {
    pub fn new(h: DenseMatrix, sigma: DenseMatrix, gbar: Vec<f64>, batch: usize, mu_lb: Option<f64>) -> Result<Self> {
        let d = gbar.len();
        if h.shape() != (d, d) || sigma.shape() != (d, d) {
            return Err(SpectraError::DimensionMismatch {
                op: "QuadraticModel",
                left: format!("gbar of length {d}"),
                right: format!("H {}x{}, Sigma {}x{}", h.rows(), h.cols(), sigma.rows(), sigma.cols()),
            });
        }
        if batch == 0 {
            return Err(SpectraError::InvalidArgument("batch size must be positive".into()));
        }
        if gbar.iter().any(|x| !x.is_finite()) {
            return Err(SpectraError::NonFinite("QuadraticModel gbar"));
        }
        let lmin = check_psd("H", &h)?;
        check_psd("Sigma", &sigma)?;
        if let Some(mu) = mu_lb {
            if !(mu > 0.0) || lmin < mu - PSD_TOL {
                return Err(SpectraError::InvalidArgument(format!(
                    "mu_lb = {mu} is not a valid lower bound (min eigenvalue of H is {lmin:.6e})"
                )));
            }
        }
        Ok(Self { h, sigma, gbar, batch, mu_lb })
    }

    pub fn dim(&self) -> usize {
        self.gbar.len()
    }

    pub fn gbar_norm_sq(&self) -> f64 {
        self.gbar.iter().map(|x| x * x).sum()
    }

    /// `x^T A y`.
    pub(crate) fn bilinear(a: &DenseMatrix, x: &[f64], y: &[f64]) -> f64 {
        (0..a.rows()).map(|i| x[i] * a.row(i).iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
    }

    pub fn gbar_h_gbar(&self) -> f64 {
        Self::bilinear(&self.h, &self.gbar, &self.gbar)
    }

    /// `tr(Sigma H)` without forming the product.
    pub fn trace_sigma_h(&self) -> f64 {
        self.sigma.dot(&self.h).expect("shapes checked at construction")
    }
}

/// Orthonormal vectors `s_i = vec(u_i v_i^T)` spanning the spike subspace of
/// a mean gradient; the projector is never formed.
#[derive(Debug, Clone)]
pub struct SpikeProjector {
    /// Basis vectors as columns of a `d x k` matrix.
    pub basis: DenseMatrix,
}

impl SpikeProjector {
    pub fn new(basis: DenseMatrix) -> Result<Self> {
        let defect = basis.orthonormality_defect();
        if defect > 1e-10 {
            return Err(SpectraError::InvalidArgument(format!("spike basis is not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self { basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Build from the leading `k` singular pairs of `gbar`, flattening
    /// `u_i v_i^T` row-major.
    pub fn from_gradient(gbar: &DenseMatrix, k: usize) -> Result<Self> {
        let f = exact_svd(gbar)?;
        if k == 0 || k > f.rank() {
            return Err(SpectraError::InvalidArgument(format!("spike rank {k} out of range 1..={}", f.rank())));
        }
        let numerical_rank = f.s.iter().filter(|&&s| s > 1e-12 * f.s[0]).count();
        if k > numerical_rank {
            return Err(SpectraError::InvalidArgument(format!(
                "spike rank {k} exceeds the numerical rank {numerical_rank} of the mean gradient"
            )));
        }
        let (m, n) = gbar.shape();
        let basis = DenseMatrix::from_fn(m * n, k, |idx, i| f.u[(idx / n, i)] * f.v[(idx % n, i)]);
        Self::new(basis)
    }

    /// `S^T A S` (`k x k`).
    pub fn project(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        let as_ = crate::matrix::mul(a, &self.basis)?;
        crate::matrix::mul_tn(&self.basis, &as_)
    }

    /// `Pi x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let coeff: Vec<f64> = (0..k).map(|i| (0..x.len()).map(|r| self.basis[(r, i)] * x[r]).sum()).collect();
        (0..x.len()).map(|r| (0..k).map(|i| self.basis[(r, i)] * coeff[i]).sum()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_gaussian;

    #[test]
    fn rank_one_projector() {
        let u = [0.6, 0.8];
        let v = [0.0, 1.0, 0.0];
        let g = DenseMatrix::from_fn(2, 3, |i, j| 5.0 * u[i] * v[j]);
        let p = SpikeProjector::from_gradient(&g, 1).unwrap();
        let s = p.basis.column(0);
        let norm: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-14);
        assert!((s[1].abs() - 0.6).abs() < 1e-14 && (s[4].abs() - 0.8).abs() < 1e-14);
        assert!(SpikeProjector::from_gradient(&g, 2).is_err());
    }

    #[test]
    fn diagonal_projector() {
        let p = SpikeProjector::from_gradient(&DenseMatrix::from_diag(&[3.0, 2.0]), 2).unwrap();
        let want = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        for (i, w) in want.iter().enumerate() {
            for (r, &x) in w.iter().enumerate() {
                assert!((p.basis[(r, i)] - x).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_projector_is_idempotent() {
        let p = SpikeProjector::from_gradient(&random_gaussian(6, 4, 3), 3).unwrap();
        assert!(p.basis.orthonormality_defect() < 1e-10);
        let x: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        let once = p.apply(&x);
        let twice = p.apply(&once);
        assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn model_validation() {
        let i2 = DenseMatrix::identity(2);
        assert!(QuadraticModel::new(i2.clone(), i2.clone(), vec![1.0, 0.0], 1, Some(1.0)).is_ok());
        assert!(QuadraticModel::new(i2.clone(), i2.clone(), vec![1.0, 0.0], 1, Some(2.0)).is_err());
        assert!(QuadraticModel::new(i2.scaled(-1.0), i2.clone(), vec![1.0, 0.0], 1, None).is_err());
        assert!(QuadraticModel::new(i2.clone(), i2.clone(), vec![1.0], 1, None).is_err());
        assert!(QuadraticModel::new(i2.clone(), i2, vec![1.0, 0.0], 0, None).is_err());
    }
}
