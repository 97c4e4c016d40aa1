use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::matrix::{gaussian_from_rng, DenseMatrix};
use crate::seed;

/// Softmax regression over a Zipf-distributed vocabulary. Features are
/// `x = mu_y + feature_noise * z` with Gaussian class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZipfTaskConfig {
    pub vocab: usize,
    pub dim: usize,
    pub zipf_exponent: f64,
    pub samples_per_batch: usize,
    pub freq_normalize: bool,
    /// Frequencies are measured relative to this quantile of the vocabulary's
    /// frequencies and floored at one, so only tokens above it are
    /// down-weighted. Zero recovers plain `1/f` weighting up to a constant.
    pub freq_reference_quantile: f64,
    pub feature_noise: f64,
    pub seed: u64,
}

impl Default for ZipfTaskConfig {
    fn default() -> Self {
        Self {
            vocab: 100,
            dim: 32,
            zipf_exponent: 1.0,
            samples_per_batch: 10_000,
            freq_normalize: false,
            freq_reference_quantile: 0.9,
            feature_noise: 1.0,
            seed: 0,
        }
    }
}

impl ZipfTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SpectraError::InvalidArgument(msg));
        if self.vocab < 10 {
            return bad(format!("vocab = {} must be at least 10", self.vocab));
        }
        if self.dim == 0 || self.samples_per_batch == 0 {
            return bad("dim and samples_per_batch must be positive".into());
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("zipf_exponent = {} must be finite and nonnegative", self.zipf_exponent));
        }
        if !(0.0..=1.0).contains(&self.freq_reference_quantile) {
            return bad(format!("freq_reference_quantile = {} must lie in [0, 1]", self.freq_reference_quantile));
        }
        if !(self.feature_noise >= 0.0) {
            return bad("feature_noise must be nonnegative".into());
        }
        Ok(())
    }
}

/// Gradients and loss of one sampled batch.
#[derive(Debug, Clone)]
pub struct ZipfBatch {
    pub grad_w: DenseMatrix,
    pub grad_b: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct ZipfTask {
    cfg: ZipfTaskConfig,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    weights: Vec<f64>,
    means: DenseMatrix,
}

/// `p_y ∝ (y + 1)^-s`.
pub fn zipf_probabilities(vocab: usize, exponent: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=vocab).map(|r| (r as f64).powf(-exponent)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

/// Per-token loss weights `1 / max(1, f_y / f_ref)`.
pub fn freq_weights(probs: &[f64], reference_quantile: f64) -> Vec<f64> {
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (reference_quantile * (sorted.len() - 1) as f64).floor() as usize;
    let reference = sorted[idx];
    probs.iter().map(|&p| 1.0 / (p / reference).max(1.0)).collect()
}

impl ZipfTask {
    pub fn new(cfg: ZipfTaskConfig) -> Result<Self> {
        cfg.validate()?;
        let probs = zipf_probabilities(cfg.vocab, cfg.zipf_exponent);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("vocab >= 10") = 1.0;
        let weights = freq_weights(&probs, cfg.freq_reference_quantile);
        let mut rng = seed::stream(cfg.seed, "zipf-means", 0);
        let means = gaussian_from_rng(cfg.vocab, cfg.dim, &mut rng);
        Ok(Self { cfg, probs, cdf, weights, means })
    }

    pub fn config(&self) -> &ZipfTaskConfig {
        &self.cfg
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Zero weights with the bias at the log label frequencies.
    pub fn initial_params(&self) -> (DenseMatrix, Vec<f64>) {
        (DenseMatrix::zeros(self.cfg.vocab, self.cfg.dim), self.probs.iter().map(|p| p.ln()).collect())
    }

    /// Inverse-CDF label draw.
    pub fn sample_label<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cfg.vocab - 1)
    }

    /// Gradient of the (optionally frequency-weighted) mean cross-entropy on
    /// batch `step`, evaluated at `(w, b)`.
    pub fn batch(&self, w: &DenseMatrix, b: &[f64], step: u64) -> Result<ZipfBatch> {
        let (vocab, dim) = (self.cfg.vocab, self.cfg.dim);
        if w.shape() != (vocab, dim) || b.len() != vocab {
            return Err(SpectraError::InvalidArgument(format!(
                "parameters must be {vocab}x{dim} weights and {vocab} biases"
            )));
        }
        let mut rng = seed::stream(self.cfg.seed, "zipf-batch", step);
        let n = self.cfg.samples_per_batch;
        let mut grad_w = DenseMatrix::zeros(vocab, dim);
        let mut grad_b = vec![0.0; vocab];
        let mut loss = 0.0;
        let mut x = vec![0.0; dim];
        let mut p = vec![0.0; vocab];
        for _ in 0..n {
            let y = self.sample_label(&mut rng);
            for (k, xk) in x.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *xk = self.means[(y, k)] + self.cfg.feature_noise * z;
            }
            for (c, pc) in p.iter_mut().enumerate() {
                *pc = b[c] + w.row(c).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = p
                .iter_mut()
                .map(|l| {
                    *l = (*l - max).exp();
                    *l
                })
                .sum();
            p.iter_mut().for_each(|l| *l /= z);
            let weight = if self.cfg.freq_normalize { self.weights[y] } else { 1.0 };
            loss += -weight * p[y].max(f64::MIN_POSITIVE).ln();
            p[y] -= 1.0;
            for c in 0..vocab {
                let coef = weight * p[c];
                grad_b[c] += coef;
                for (g, xk) in grad_w.row_mut(c).iter_mut().zip(&x) {
                    *g += coef * xk;
                }
            }
        }
        let inv = 1.0 / n as f64;
        grad_w.scale(inv);
        grad_b.iter_mut().for_each(|g| *g *= inv);
        Ok(ZipfBatch { grad_w, grad_b, loss: loss * inv })
    }
}
