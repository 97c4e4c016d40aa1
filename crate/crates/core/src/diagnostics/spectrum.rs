use serde::Serialize;

use crate::error::{Result, SpectraError};
use crate::matrix::{exact_svd, DenseMatrix};

/// Fraction of directions treated as the spike when reporting.
pub const DEFAULT_SPIKE_RATIO: f64 = 0.015;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Singular values, descending.
    pub sigmas: Vec<f64>,
    /// `cdf[j] = sum_{i<=j} sigma_i^2 / sum_i sigma_i^2`.
    pub cdf: Vec<f64>,
    pub spike_count: usize,
    /// `sigma_{spike_count} / sigma_{spike_count + 1}` (1-based); infinite when
    /// the next value is zero or there is no tail.
    pub gap_ratio: f64,
}

impl SpectrumReport {
    pub fn from_sigmas(sigmas: Vec<f64>, spike_count: usize) -> Result<Self> {
        if sigmas.is_empty() || sigmas.iter().all(|&s| s == 0.0) {
            return Err(SpectraError::Degenerate("spectrum of a zero matrix".into()));
        }
        let spike_count = spike_count.clamp(1, sigmas.len());
        let cdf = cumulative_energy(&sigmas);
        let gap_ratio = match sigmas.get(spike_count) {
            Some(&next) if next > 0.0 => sigmas[spike_count - 1] / next,
            _ => f64::INFINITY,
        };
        Ok(Self { sigmas, cdf, spike_count, gap_ratio })
    }

    /// Energy share of the leading `j` directions.
    pub fn energy_share(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.cdf[j.min(self.cdf.len()) - 1]
        }
    }
}

/// Normalized cumulative squared spectrum; the last entry is exactly 1.
pub fn cumulative_energy(sigmas: &[f64]) -> Vec<f64> {
    let total: f64 = sigmas.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = sigmas
        .iter()
        .map(|s| {
            acc += s * s;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Exact spectrum with the spike boundary at `max(1, round(ratio * r))`.
pub fn spectrum_report(g: &DenseMatrix, spike_ratio: f64) -> Result<SpectrumReport> {
    if g.is_zero() {
        return Err(SpectraError::Degenerate("spectrum_report of a zero matrix".into()));
    }
    let sigmas = exact_svd(g)?.s;
    let r = sigmas.len();
    let count = ((spike_ratio * r as f64).round_ties_even() as usize).max(1);
    SpectrumReport::from_sigmas(sigmas, count)
}

/// Exploratory boundary: the index after which `log sigma` drops most.
/// Not used by any reported metric.
pub fn largest_log_gap(sigmas: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..sigmas.len().saturating_sub(1) {
        let (a, b) = (sigmas[i], sigmas[i + 1]);
        if a <= 0.0 {
            break;
        }
        let gap = if b > 0.0 { (a / b).ln() } else { f64::INFINITY };
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((i + 1, gap));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_value_example() {
        let r = SpectrumReport::from_sigmas(vec![10.0, 0.1, 0.1], 1).unwrap();
        assert!((r.gap_ratio - 100.0).abs() < 1e-12);
        assert!((r.cdf[0] - 100.0 / 100.02).abs() < 1e-15);
        assert_eq!(r.cdf[2], 1.0);
    }

    #[test]
    fn flat_spectrum_is_linear() {
        let r = spectrum_report(&DenseMatrix::identity(8).scaled(3.0), 0.015).unwrap();
        for (j, c) in r.cdf.iter().enumerate() {
            assert!((c - (j + 1) as f64 / 8.0).abs() < 1e-12);
        }
        assert_eq!(r.spike_count, 1);
    }

    #[test]
    fn zero_is_rejected() {
        assert!(spectrum_report(&DenseMatrix::zeros(3, 3), 0.1).is_err());
    }

    #[test]
    fn log_gap_detector() {
        assert_eq!(largest_log_gap(&[10.0, 9.0, 0.5, 0.4]), Some(2));
        assert_eq!(largest_log_gap(&[1.0]), None);
    }
}
