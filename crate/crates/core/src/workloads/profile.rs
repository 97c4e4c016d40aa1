use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::matrix::{mul_nt, random_orthonormal, DenseMatrix};
use crate::seed;

/// Matrix with a few dominant singular values over a nearly flat tail, the
/// shape observed in large-model gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub m: usize,
    pub n: usize,
    /// Fraction of directions in the head.
    pub spike_ratio: f64,
    /// Leading singular value relative to the tail level.
    pub head_ratio: f64,
    /// Relative decline of the tail from its first to its last value.
    pub tail_spread: f64,
    pub seed: u64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { m: 256, n: 256, spike_ratio: 0.015, head_ratio: 100.0, tail_spread: 0.01, seed: 0 }
    }
}

impl ProfileConfig {
    pub fn head_count(&self) -> usize {
        ((self.spike_ratio * self.m.min(self.n) as f64).ceil() as usize).max(1)
    }

    /// Singular values: head `head_ratio * (1 - 0.1 i)`, tail from 1 down to
    /// `1 - tail_spread`.
    pub fn sigmas(&self) -> Vec<f64> {
        let r = self.m.min(self.n);
        let h = self.head_count();
        (0..r)
            .map(|i| {
                if i < h {
                    self.head_ratio * (1.0 - 0.1 * i as f64).max(0.5)
                } else {
                    let frac = if r - h > 1 { (i - h) as f64 / (r - h - 1) as f64 } else { 0.0 };
                    1.0 - self.tail_spread * frac
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.min(self.n) < 2 || self.head_count() >= self.m.min(self.n) {
            return Err(SpectraError::InvalidArgument(format!(
                "profile {}x{} leaves no tail for spike_ratio {}",
                self.m, self.n, self.spike_ratio
            )));
        }
        if !(self.head_ratio >= 1.0) || !(0.0..1.0).contains(&self.tail_spread) {
            return Err(SpectraError::InvalidArgument("need head_ratio >= 1 and tail_spread in [0, 1)".into()));
        }
        Ok(())
    }
}

/// `U diag(sigmas) V^T` with Haar-random orthonormal factors.
pub fn paper_profile(cfg: &ProfileConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    let r = cfg.m.min(cfg.n);
    let mut rng = seed::stream(cfg.seed, "profile", 0);
    let mut u = random_orthonormal(cfg.m, r, &mut rng);
    let v = random_orthonormal(cfg.n, r, &mut rng);
    u.scale_columns(&cfg.sigmas());
    mul_nt(&u, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::exact_svd;

    #[test]
    fn planted_spectrum_is_recovered() {
        let cfg = ProfileConfig { m: 40, n: 30, seed: 3, ..Default::default() };
        let s = exact_svd(&paper_profile(&cfg).unwrap()).unwrap().s;
        for (a, b) in s.iter().zip(cfg.sigmas()) {
            assert!((a - b).abs() < 1e-10 * 100.0);
        }
        assert_eq!(cfg.head_count(), 1);
    }
}
