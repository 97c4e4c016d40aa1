//! Closed-form operation counts matching what the kernels charge to a
//! [`FlopCounter`](crate::matrix::FlopCounter). Used to extrapolate to shapes
//! too large to execute.

use crate::matrix::thin_qr_flops;

pub fn matmul_flops(m: usize, n: usize, p: usize) -> u64 {
    2 * m as u64 * n as u64 * p as u64
}

/// `iters` warm-started rounds on an `m x n` matrix at rank `k`:
/// `iters * (4mnk + qr(m, k))`.
pub fn power_iteration_flops(m: usize, n: usize, k: usize, iters: usize) -> u64 {
    iters as u64 * (2 * matmul_flops(m, n, k) + thin_qr_flops(m, k))
}

/// Newton–Schulz with `r = min(m, n)`, `c = max(m, n)`:
/// `steps * (4 r^2 c + 2 r^3)`.
pub fn newton_schulz_flops(m: usize, n: usize, steps: usize) -> u64 {
    let (r, c) = (m.min(n), m.max(n));
    steps as u64 * (2 * matmul_flops(r, r, c) + matmul_flops(r, r, r))
}

/// Randomized bootstrap at sketch width `l = min(k + oversample, min(m, n))`,
/// excluding the `l x l` exact SVD.
pub fn bootstrap_flops(m: usize, n: usize, k: usize, oversample: usize) -> u64 {
    let l = (k + oversample).min(m.min(n));
    4 * matmul_flops(m, n, l)
        + 2 * thin_qr_flops(m, l)
        + 2 * thin_qr_flops(n, l)
        + matmul_flops(m, l, l)
        + matmul_flops(n, l, l)
}

/// Steady-state Spectra step: power iteration plus the two rank-`k`
/// products that remove and re-add the spike.
pub fn spectra_step_flops(m: usize, n: usize, k: usize, iters: usize) -> u64 {
    power_iteration_flops(m, n, k, iters) + 2 * matmul_flops(m, n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_ratio_is_linear_in_size_over_rank() {
        // NS is cubic, power iteration is quadratic times k.
        let r1 = newton_schulz_flops(512, 512, 5) as f64 / power_iteration_flops(512, 512, 8, 1) as f64;
        let r2 = newton_schulz_flops(1024, 1024, 5) as f64 / power_iteration_flops(1024, 1024, 8, 1) as f64;
        assert!((r2 / r1 - 2.0).abs() < 0.05);
    }

    #[test]
    fn linear_in_iterations() {
        assert_eq!(power_iteration_flops(100, 80, 4, 2), 2 * power_iteration_flops(100, 80, 4, 1));
    }

    #[test]
    fn leading_term() {
        let f = power_iteration_flops(1000, 1000, 10, 1);
        assert!(f >= 4 * 1000 * 1000 * 10);
        assert!(f - 4 * 1000 * 1000 * 10 <= 10 * 1000 * 10 * 10);
    }
}
