use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::matrix::{mul_nt, random_orthonormal, thin_qr, DenseMatrix, FlopCounter};
use crate::seed;

/// Relative jitter on every active coefficient.
pub const COEFFICIENT_JITTER: f64 = 0.1;

/// Gradient stream with a low-rank spike over a smooth, intermittent tail.
///
/// Tail direction `j` (0-based, `T` tail directions) has expected magnitude
/// `tail_scale * tail_decay^(j/(T-1))` and fires with probability
/// `tail_sparsity^(j/(T-1))`, so activation becomes rarer further down the
/// spectrum; active coefficients are divided by that probability to keep the
/// mean fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikedStreamConfig {
    pub m: usize,
    pub n: usize,
    pub spike_count: usize,
    pub spike_scale: f64,
    pub tail_scale: f64,
    pub tail_sparsity: f64,
    pub tail_decay: f64,
    pub drift_rate: f64,
    pub seed: u64,
}

impl Default for SpikedStreamConfig {
    fn default() -> Self {
        Self {
            m: 64,
            n: 64,
            spike_count: 1,
            spike_scale: 30.0,
            tail_scale: 1.0,
            tail_sparsity: 1.0,
            tail_decay: 1.0,
            drift_rate: 0.0,
            seed: 0,
        }
    }
}

impl SpikedStreamConfig {
    pub fn validate(&self) -> Result<()> {
        let r = self.m.min(self.n);
        let bad = |msg: String| Err(SpectraError::InvalidArgument(msg));
        if r == 0 {
            return bad(format!("stream shape {}x{} is empty", self.m, self.n));
        }
        if self.spike_count >= r {
            return bad(format!("spike_count = {} must be below min(m, n) = {r}", self.spike_count));
        }
        if !(self.tail_scale > 0.0) || !(self.spike_scale >= self.tail_scale) {
            return bad(format!(
                "need spike_scale >= tail_scale > 0, got spike_scale = {}, tail_scale = {}",
                self.spike_scale, self.tail_scale
            ));
        }
        if !(self.tail_sparsity > 0.0 && self.tail_sparsity <= 1.0) {
            return bad(format!("tail_sparsity = {} must lie in (0, 1]", self.tail_sparsity));
        }
        if !(self.tail_decay > 0.0 && self.tail_decay <= 1.0) {
            return bad(format!("tail_decay = {} must lie in (0, 1]", self.tail_decay));
        }
        if !(self.drift_rate >= 0.0 && self.drift_rate.is_finite()) {
            return bad(format!("drift_rate = {} must be finite and nonnegative", self.drift_rate));
        }
        Ok(())
    }

    fn tail_profile(&self, j: usize, base: f64) -> f64 {
        let t = self.m.min(self.n) - self.spike_count;
        if t <= 1 {
            1.0
        } else {
            base.powf(j as f64 / (t - 1) as f64)
        }
    }

    /// Expected magnitude of direction `i` (spike first).
    pub fn expected_magnitude(&self, i: usize) -> f64 {
        if i < self.spike_count {
            self.spike_scale
        } else {
            self.tail_scale * self.tail_profile(i - self.spike_count, self.tail_decay)
        }
    }

    /// Probability that direction `i` contributes to a draw.
    pub fn activation_probability(&self, i: usize) -> f64 {
        if i < self.spike_count {
            1.0
        } else {
            self.tail_profile(i - self.spike_count, self.tail_sparsity)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikedStream {
    cfg: SpikedStreamConfig,
    u: DenseMatrix,
    v: DenseMatrix,
    step: u64,
}

impl SpikedStream {
    pub fn new(cfg: SpikedStreamConfig) -> Result<Self> {
        cfg.validate()?;
        let r = cfg.m.min(cfg.n);
        let mut rng = seed::stream(cfg.seed, "stream-basis", 0);
        let u = random_orthonormal(cfg.m, r, &mut rng);
        let v = random_orthonormal(cfg.n, r, &mut rng);
        Ok(Self { cfg, u, v, step: 0 })
    }

    /// Rebuild a stream from saved state.
    pub fn from_parts(cfg: SpikedStreamConfig, u: DenseMatrix, v: DenseMatrix, step: u64) -> Result<Self> {
        cfg.validate()?;
        let r = cfg.m.min(cfg.n);
        if u.shape() != (cfg.m, r) || v.shape() != (cfg.n, r) {
            return Err(SpectraError::InvalidArgument("stream basis does not match the configured shape".into()));
        }
        Ok(Self { cfg, u, v, step })
    }

    pub fn config(&self) -> &SpikedStreamConfig {
        &self.cfg
    }

    pub fn left_basis(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn right_basis(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn compose(&self, coeffs: &[f64]) -> DenseMatrix {
        let mut us = self.u.clone();
        us.scale_columns(coeffs);
        mul_nt(&us, &self.v).expect("basis shapes agree")
    }

    /// Gradient with every direction at its expected magnitude.
    pub fn mean_gradient(&self) -> DenseMatrix {
        let r = self.cfg.m.min(self.cfg.n);
        self.compose(&(0..r).map(|i| self.cfg.expected_magnitude(i)).collect::<Vec<_>>())
    }

    /// One stochastic gradient; advances the stream by one step.
    pub fn next_gradient(&mut self) -> DenseMatrix {
        let r = self.cfg.m.min(self.cfg.n);
        let mut rng = seed::stream(self.cfg.seed, "stream-sample", self.step);
        let coeffs: Vec<f64> = (0..r)
            .map(|i| {
                let p = self.cfg.activation_probability(i);
                let fire: f64 = rng.random();
                let jitter: f64 = rng.sample(StandardNormal);
                if fire < p {
                    self.cfg.expected_magnitude(i) * (1.0 + COEFFICIENT_JITTER * jitter) / p
                } else {
                    0.0
                }
            })
            .collect();
        let g = self.compose(&coeffs);
        if self.cfg.drift_rate > 0.0 {
            self.drift();
        }
        self.step += 1;
        g
    }

    /// Average of `b` consecutive draws.
    pub fn next_batch(&mut self, b: usize) -> DenseMatrix {
        let mut acc = self.next_gradient();
        for _ in 1..b {
            acc.axpy(1.0, &self.next_gradient()).expect("same shape");
        }
        acc.scale(1.0 / b.max(1) as f64);
        acc
    }

    fn drift(&mut self) {
        let mut rng = seed::stream(self.cfg.seed, "stream-drift", self.step);
        let flops = FlopCounter::new();
        for basis in [&mut self.u, &mut self.v] {
            let mut perturbed = basis.clone();
            for x in perturbed.data_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x += self.cfg.drift_rate * z;
            }
            *basis = thin_qr(&perturbed, &flops).expect("finite perturbed basis").q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::exact_svd;

    fn cfg() -> SpikedStreamConfig {
        SpikedStreamConfig { m: 12, n: 10, spike_count: 2, spike_scale: 20.0, ..Default::default() }
    }

    #[test]
    fn deterministic_under_seed() {
        let mut a = SpikedStream::new(cfg()).unwrap();
        let mut b = SpikedStream::new(cfg()).unwrap();
        for _ in 0..3 {
            assert_eq!(a.next_gradient(), b.next_gradient());
        }
    }

    #[test]
    fn mean_spectrum_matches_profile() {
        let s = SpikedStream::new(cfg()).unwrap();
        let sig = exact_svd(&s.mean_gradient()).unwrap().s;
        assert!((sig[0] - 20.0).abs() < 1e-10 && (sig[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn activation_profile_is_diminishing() {
        let c = SpikedStreamConfig { tail_sparsity: 0.1, tail_decay: 0.5, ..cfg() };
        assert_eq!(c.activation_probability(1), 1.0);
        assert_eq!(c.activation_probability(2), 1.0);
        assert!((c.activation_probability(9) - 0.1).abs() < 1e-15);
        assert!((c.expected_magnitude(9) - 0.5).abs() < 1e-15);
        for i in 2..9 {
            assert!(c.activation_probability(i + 1) < c.activation_probability(i));
        }
    }

    #[test]
    fn drift_rotates_but_keeps_orthonormality() {
        let mut s = SpikedStream::new(SpikedStreamConfig { drift_rate: 0.05, ..cfg() }).unwrap();
        let u0 = s.left_basis().clone();
        s.next_gradient();
        assert_ne!(&u0, s.left_basis());
        assert!(s.left_basis().orthonormality_defect() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(SpikedStreamConfig { spike_count: 10, ..cfg() }.validate().is_err());
        assert!(SpikedStreamConfig { spike_scale: 0.5, ..cfg() }.validate().is_err());
        assert!(SpikedStreamConfig { tail_sparsity: 0.0, ..cfg() }.validate().is_err());
    }
}
