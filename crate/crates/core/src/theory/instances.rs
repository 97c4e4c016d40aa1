use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bounds::expected_quadratic_form;
use super::model::{QuadraticModel, SpikeProjector};
use crate::error::Result;
use crate::matrix::{gaussian_from_rng, mul_tn, sym_eigen, DenseMatrix};
use crate::seed;

/// Ridge added to random Hessians so that `H >= delta I`.
pub const HESSIAN_RIDGE: f64 = 1e-3;

/// Shape ranges for random quadratic instances; the parameter is an
/// `m x n` matrix so `d = m n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    pub min_side: usize,
    pub max_side: usize,
    pub max_batch: usize,
    /// Zero the noise correlation between spike and tail directions
    /// (`Sigma <- Pi Sigma Pi + (I - Pi) Sigma (I - Pi)`). Without this the
    /// projected trace can exceed the full one and the bound chain may fail.
    pub decouple_spike_noise: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self { min_side: 2, max_side: 5, max_batch: 64, decouple_spike_noise: true }
    }
}

/// One random instance with its spike basis.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: QuadraticModel,
    pub proj: SpikeProjector,
    pub gbar: DenseMatrix,
}

fn side<R: Rng>(rng: &mut R, spec: &InstanceSpec) -> usize {
    rng.random_range(spec.min_side..=spec.max_side)
}

fn gram_plus(rng: &mut impl Rng, d: usize, ridge: f64) -> DenseMatrix {
    let p = rng.random_range(1..=d);
    let a = gaussian_from_rng(p, d, rng);
    let mut g = mul_tn(&a, &a).expect("matching inner dimension");
    symmetrize(&mut g);
    for i in 0..d {
        g[(i, i)] += ridge;
    }
    g
}

fn symmetrize(a: &mut DenseMatrix) {
    let n = a.rows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Random instance number `index` under `root`: Gaussian mean gradient,
/// `H = A^T A + delta I`, `Sigma = C^T C` with random ranks, random batch
/// size and spike rank, and `mu` set to the smallest eigenvalue of `H`.
pub fn random_instance(root: u64, index: u64, spec: &InstanceSpec) -> Result<Instance> {
    let mut rng = seed::stream(root, "theory-instance", index);
    let (m, n) = (side(&mut rng, spec), side(&mut rng, spec));
    let d = m * n;
    let gbar = gaussian_from_rng(m, n, &mut rng);
    let k = rng.random_range(1..m.min(n));
    let h = gram_plus(&mut rng, d, HESSIAN_RIDGE);
    let mut sigma = gram_plus(&mut rng, d, 0.0);
    let batch = rng.random_range(1..=spec.max_batch);
    let mu = sym_eigen(&h)?.min_value().min(HESSIAN_RIDGE);
    let proj = SpikeProjector::from_gradient(&gbar, k)?;
    if spec.decouple_spike_noise {
        sigma = pinch(&sigma, &proj)?;
    }
    let model = QuadraticModel::new(h, sigma, gbar.data().to_vec(), batch, Some(mu))?;
    Ok(Instance { model, proj, gbar })
}

/// `Pi A Pi + (I - Pi) A (I - Pi) = A - Pi A - A Pi + 2 Pi A Pi`.
pub fn pinch(a: &DenseMatrix, proj: &SpikeProjector) -> Result<DenseMatrix> {
    let pi = crate::matrix::mul_nt(&proj.basis, &proj.basis)?;
    let pa = crate::matrix::mul(&pi, a)?;
    let pap = crate::matrix::mul(&pa, &pi)?;
    let mut out = a.sub(&pa)?.sub(&pa.transpose())?;
    out.axpy(2.0, &pap)?;
    symmetrize(&mut out);
    Ok(out)
}

/// Monte-Carlo estimate of `E[g^T H g]` for `g ~ N(gbar, Sigma / B)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Distance from the closed form in units of the standard error.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.closed_form).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

pub fn monte_carlo_quadratic_form(
    model: &QuadraticModel,
    samples: usize,
    seed_value: u64,
) -> Result<MonteCarloEstimate> {
    let d = model.dim();
    let eig = sym_eigen(&model.sigma)?;
    let b = model.batch as f64;
    // L = V diag(sqrt(lambda / B)) so that L L^T = Sigma / B.
    let mut l = eig.vectors.clone();
    l.scale_columns(&eig.values.iter().map(|&x| (x.max(0.0) / b).sqrt()).collect::<Vec<_>>());
    let mut rng = seed::stream(seed_value, "theory-mc", 0);
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..samples {
        z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        for i in 0..d {
            g[i] = model.gbar[i] + l.row(i).iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
        let q = QuadraticModel::bilinear(&model.h, &g, &g);
        let delta = q - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (q - mean);
    }
    let var = if samples > 1 { m2 / (samples - 1) as f64 } else { 0.0 };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / samples as f64).sqrt(),
        closed_form: expected_quadratic_form(model),
        samples,
    })
}

/// Covariance family moving mass from the tail into the spike: with total
/// variance `total`, `Sigma(t) = total (t Pi / k + (1 - t)(I - Pi)/(d - k))`.
pub fn transfer_covariance(proj: &SpikeProjector, total: f64, t: f64) -> Result<DenseMatrix> {
    let d = proj.basis.rows();
    let k = proj.rank();
    let pi = crate::matrix::mul_nt(&proj.basis, &proj.basis)?;
    let (a, b) = (total * t / k as f64, total * (1.0 - t) / (d - k) as f64);
    let mut s = DenseMatrix::from_fn(d, d, |i, j| (a - b) * pi[(i, j)] + if i == j { b } else { 0.0 });
    symmetrize(&mut s);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_valid_and_reproducible() {
        let spec = InstanceSpec::default();
        let a = random_instance(3, 7, &spec).unwrap();
        let b = random_instance(3, 7, &spec).unwrap();
        assert_eq!(a.model.h, b.model.h);
        assert_eq!(a.model.sigma, b.model.sigma);
        assert!(a.model.mu_lb.unwrap() > 0.0);
        assert!(a.proj.rank() < a.gbar.rows().min(a.gbar.cols()));
    }

    #[test]
    fn pinched_noise_has_no_spike_tail_correlation() {
        let inst = random_instance(5, 1, &InstanceSpec::default()).unwrap();
        let s = &inst.proj.basis;
        let d = s.rows();
        let pi = crate::matrix::mul_nt(s, s).unwrap();
        let ps = crate::matrix::mul(&pi, &inst.model.sigma).unwrap();
        let sp = crate::matrix::mul(&inst.model.sigma, &pi).unwrap();
        assert!(ps.sub(&sp).unwrap().max_abs() < 1e-10 * inst.model.sigma.max_abs());
        assert_eq!(inst.model.sigma.shape(), (d, d));
    }

    #[test]
    fn transfer_family_preserves_total_variance() {
        let proj = SpikeProjector::new(DenseMatrix::eye(6, 2)).unwrap();
        for t in [0.0, 0.3, 1.0] {
            let s = transfer_covariance(&proj, 5.0, t).unwrap();
            assert!((s.trace() - 5.0).abs() < 1e-12);
            assert!((s[(0, 0)] + s[(1, 1)] - 5.0 * t).abs() < 1e-12);
        }
    }
}
