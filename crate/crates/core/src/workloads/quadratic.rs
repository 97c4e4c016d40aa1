use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Result, SpectraError};
use crate::matrix::{gaussian_from_rng, mul, mul_nt, mul_tn, random_orthonormal, DenseMatrix};
use crate::seed;

/// `L(W) = 1/2 sum_ij lambda_ij <W - W*, u_i v_j^T>^2` with the first
/// `spike_count` diagonal elements `u_i v_i^T` forming the spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticTaskConfig {
    pub m: usize,
    pub n: usize,
    pub spike_count: usize,
    pub curvature_head: f64,
    pub curvature_tail: f64,
    /// Noise standard deviation on spike coordinates.
    pub spike_noise: f64,
    /// Noise standard deviation on every other coordinate.
    pub tail_noise: f64,
    /// Entry scale of the minimizer; training starts from zero.
    pub target_scale: f64,
    pub seed: u64,
}

impl Default for QuadraticTaskConfig {
    fn default() -> Self {
        Self {
            m: 32,
            n: 32,
            spike_count: 2,
            curvature_head: 10.0,
            curvature_tail: 1.0,
            spike_noise: 1.0,
            tail_noise: 0.0,
            target_scale: 1.0,
            seed: 0,
        }
    }
}

impl QuadraticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SpectraError::InvalidArgument(msg));
        let r = self.m.min(self.n);
        if r == 0 || self.spike_count == 0 || self.spike_count >= r {
            return bad(format!("spike_count = {} must lie in 1..{r}", self.spike_count));
        }
        if !(self.curvature_tail > 0.0) || !(self.curvature_head >= self.curvature_tail) {
            return bad(format!(
                "need curvature_head >= curvature_tail > 0, got {} and {}",
                self.curvature_head, self.curvature_tail
            ));
        }
        if !(self.spike_noise >= 0.0) || !(self.tail_noise >= 0.0) || !self.target_scale.is_finite() {
            return bad("noise levels must be nonnegative and target_scale finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticTask {
    cfg: QuadraticTaskConfig,
    u: DenseMatrix,
    v: DenseMatrix,
    target: DenseMatrix,
    initial_tail: f64,
}

impl QuadraticTask {
    pub fn new(cfg: QuadraticTaskConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seed::stream(cfg.seed, "quadratic-basis", 0);
        let u = random_orthonormal(cfg.m, cfg.m, &mut rng);
        let v = random_orthonormal(cfg.n, cfg.n, &mut rng);
        let mut rng = seed::stream(cfg.seed, "quadratic-target", 0);
        let target = gaussian_from_rng(cfg.m, cfg.n, &mut rng).scaled(cfg.target_scale);
        let mut task = Self { cfg, u, v, target, initial_tail: 0.0 };
        task.initial_tail = task.tail_error(&task.initial_point())?;
        Ok(task)
    }

    pub fn config(&self) -> &QuadraticTaskConfig {
        &self.cfg
    }

    pub fn initial_point(&self) -> DenseMatrix {
        DenseMatrix::zeros(self.cfg.m, self.cfg.n)
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }

    fn is_spike(&self, i: usize, j: usize) -> bool {
        i == j && i < self.cfg.spike_count
    }

    fn curvature(&self, i: usize, j: usize) -> f64 {
        if self.is_spike(i, j) {
            self.cfg.curvature_head
        } else {
            self.cfg.curvature_tail
        }
    }

    /// Error coordinates `U^T (W - W*) V`.
    pub fn coordinates(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        if w.shape() != (self.cfg.m, self.cfg.n) {
            return Err(SpectraError::DimensionMismatch {
                op: "quadratic task",
                left: shape(self.cfg.m, self.cfg.n),
                right: shape(w.rows(), w.cols()),
            });
        }
        mul(&mul_tn(&self.u, &w.sub(&self.target)?)?, &self.v)
    }

    pub fn loss(&self, w: &DenseMatrix) -> Result<f64> {
        let c = self.coordinates(w)?;
        let mut acc = 0.0;
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                acc += self.curvature(i, j) * c[(i, j)] * c[(i, j)];
            }
        }
        Ok(0.5 * acc)
    }

    /// Exact gradient plus coordinate noise drawn from the `step`-th noise
    /// stream.
    pub fn gradient(&self, w: &DenseMatrix, step: u64) -> Result<DenseMatrix> {
        let mut c = self.coordinates(w)?;
        let mut rng = seed::stream(self.cfg.seed, "quadratic-noise", step);
        let noisy = self.cfg.spike_noise > 0.0 || self.cfg.tail_noise > 0.0;
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                let sd = if self.is_spike(i, j) { self.cfg.spike_noise } else { self.cfg.tail_noise };
                let z: f64 = if noisy { rng.sample(StandardNormal) } else { 0.0 };
                c[(i, j)] = self.curvature(i, j) * c[(i, j)] + sd * z;
            }
        }
        mul_nt(&mul(&self.u, &c)?, &self.v)
    }

    /// `||Pi_tail (W - W*)||_F`.
    pub fn tail_error(&self, w: &DenseMatrix) -> Result<f64> {
        let c = self.coordinates(w)?;
        let mut acc = 0.0;
        for i in 0..c.rows() {
            for j in 0..c.cols() {
                if !self.is_spike(i, j) {
                    acc += c[(i, j)] * c[(i, j)];
                }
            }
        }
        Ok(acc.sqrt())
    }

    /// Tail error relative to the starting point.
    pub fn relative_tail_error(&self, w: &DenseMatrix) -> Result<f64> {
        Ok(self.tail_error(w)? / self.initial_tail)
    }

    /// Orthonormal basis of the spike: `vec(u_i v_i^T)` flattened row-major,
    /// one column per spike element.
    pub fn spike_basis(&self) -> DenseMatrix {
        let (m, n) = (self.cfg.m, self.cfg.n);
        DenseMatrix::from_fn(m * n, self.cfg.spike_count, |idx, i| self.u[(idx / n, i)] * self.v[(idx % n, i)])
    }

    /// Spike-subspace left and right factors.
    pub fn spike_factors(&self) -> (DenseMatrix, DenseMatrix) {
        (self.u.leading_columns(self.cfg.spike_count), self.v.leading_columns(self.cfg.spike_count))
    }
}
