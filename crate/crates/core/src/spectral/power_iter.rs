use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_lowrank_svd;
use crate::error::{shape, Result, SpectraError};
use crate::matrix::{matmul, thin_qr, DenseMatrix, FlopCounter, SvdFactors};
use crate::seed;

/// Column norms at or below this multiple of `||G||_F` are replaced by a
/// fresh random direction.
pub const COLUMN_COLLAPSE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerIterConfig {
    /// Target rank.
    pub k: usize,
    /// Iterations per warm-started call.
    pub iters: usize,
    /// Extra sketch columns for the cold-start bootstrap.
    pub oversample: usize,
    /// Root seed for the bootstrap sketch and collapse substitutions.
    pub seed: u64,
    /// Re-orthonormalize `V` with a QR after the last iteration.
    pub orthonormalize_v: bool,
    /// Run the full iteration only every `refresh_interval` calls; calls in
    /// between reuse the cached subspace without updating it.
    pub refresh_interval: usize,
}

impl PowerIterConfig {
    pub fn new(k: usize, iters: usize) -> Self {
        Self { k, iters, ..Self::default() }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.k == 0 || self.k > rows.min(cols) {
            return Err(SpectraError::InvalidArgument(format!(
                "rank k = {} must lie in 1..={} for a {} matrix",
                self.k,
                rows.min(cols),
                shape(rows, cols)
            )));
        }
        if self.iters == 0 {
            return Err(SpectraError::InvalidArgument("power iteration count must be >= 1".into()));
        }
        if self.refresh_interval == 0 {
            return Err(SpectraError::InvalidArgument("refresh_interval must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self { k: 1, iters: 1, oversample: 8, seed: 0, orthonormalize_v: false, refresh_interval: 1 }
    }
}

/// Right subspace carried between calls, enabling warm starts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubspaceCache {
    /// `n x k` right factor from the previous call.
    pub v_cache: Option<DenseMatrix>,
    pub bootstrap_count: u64,
    pub refresh_count: u64,
    /// Total calls, used to schedule refreshes.
    pub calls: u64,
}

impl SubspaceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.v_cache.is_none()
    }

    /// Number of stored scalars (`n * k` once populated).
    pub fn scalars(&self) -> usize {
        self.v_cache.as_ref().map_or(0, DenseMatrix::len)
    }
}

/// Factors plus metadata about how they were produced.
#[derive(Debug, Clone)]
pub struct PowerIterOutput {
    pub factors: SvdFactors,
    /// The cache was empty and a randomized bootstrap ran.
    pub bootstrapped: bool,
    /// The input was identically zero.
    pub degenerate: bool,
    /// Columns whose norm collapsed and were replaced by random directions.
    pub substituted_columns: Vec<usize>,
    /// `||V^T V - I||_F` of the returned right factor.
    pub v_orthonormality_defect: f64,
    /// Whether the cached subspace was updated on this call.
    pub refreshed: bool,
}

/// Rank-`k` factors of `g`, warm-started from `cache`.
///
/// An empty cache triggers a randomized bootstrap. Otherwise exactly
/// `cfg.iters` rounds of `P = G V, U = qr(P), W = G^T U, s = |W|_col,
/// V = W / s` run and the cache is replaced by the new `V`. Columns of `V`
/// are unit norm but only approximately orthogonal unless
/// `cfg.orthonormalize_v` is set.
pub fn power_iteration_svd(
    g: &DenseMatrix,
    cfg: &PowerIterConfig,
    cache: &mut SubspaceCache,
    flops: &FlopCounter,
) -> Result<PowerIterOutput> {
    let (m, n) = g.shape();
    cfg.validate(m, n)?;
    if !g.is_finite() {
        return Err(SpectraError::NonFinite("power_iteration_svd"));
    }
    if let Some(v) = &cache.v_cache {
        if v.shape() != (n, cfg.k) {
            return Err(SpectraError::DimensionMismatch {
                op: "power_iteration_svd cache",
                left: shape(n, cfg.k),
                right: shape(v.rows(), v.cols()),
            });
        }
    }
    let call = cache.calls;
    cache.calls += 1;
    let gnorm = g.frobenius_norm();
    let degenerate = gnorm == 0.0;

    let Some(v0) = cache.v_cache.as_ref() else {
        let boot_seed = seed::derive(cfg.seed, "bootstrap", cache.bootstrap_count);
        let out = bootstrap_lowrank_svd(g, cfg.k, cfg.oversample, boot_seed, flops)?;
        cache.bootstrap_count += 1;
        cache.v_cache = Some(out.factors.v.clone());
        let defect = out.factors.v.orthonormality_defect();
        return Ok(PowerIterOutput {
            factors: out.factors,
            bootstrapped: true,
            degenerate: out.degenerate,
            substituted_columns: Vec::new(),
            v_orthonormality_defect: defect,
            refreshed: true,
        });
    };

    let threshold = COLUMN_COLLAPSE_TOLERANCE * gnorm;
    let mut substituted = Vec::new();

    if !call.is_multiple_of(cfg.refresh_interval as u64) {
        // Stale step: project onto the cached subspace without refreshing it.
        let v = v0.clone();
        let mut u = matmul(g, &v, false, false, flops)?;
        let mut s = u.column_norms();
        for (j, sj) in s.iter_mut().enumerate() {
            if *sj <= threshold {
                substituted.push(j);
                *sj = 0.0;
            }
        }
        let inv: Vec<f64> = s.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 }).collect();
        u.scale_columns(&inv);
        if !substituted.is_empty() {
            let q = thin_qr(&u, flops)?.q;
            for &j in &substituted {
                u.set_column(j, &q.column(j));
            }
        }
        let defect = v.orthonormality_defect();
        return Ok(PowerIterOutput {
            factors: sort_factors(u, s, v),
            bootstrapped: false,
            degenerate,
            substituted_columns: substituted,
            v_orthonormality_defect: defect,
            refreshed: false,
        });
    }

    let mut v = v0.clone();
    let mut u = DenseMatrix::zeros(m, cfg.k);
    let mut s = vec![0.0; cfg.k];
    for it in 0..cfg.iters {
        let p = matmul(g, &v, false, false, flops)?;
        u = thin_qr(&p, flops)?.q;
        let mut w = matmul(g, &u, true, false, flops)?;
        s = w.column_norms();
        let collapsed: Vec<usize> = (0..cfg.k).filter(|&j| s[j] <= threshold).collect();
        if !collapsed.is_empty() {
            let mut rng = seed::stream(cfg.seed, "collapse", cache.refresh_count * cfg.iters as u64 + it as u64);
            replace_with_random_directions(&mut w, &collapsed, &mut rng);
            for &j in &collapsed {
                s[j] = 0.0;
                if !substituted.contains(&j) {
                    substituted.push(j);
                }
            }
        }
        let inv: Vec<f64> = s.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 1.0 }).collect();
        w.scale_columns(&inv);
        v = w;
    }
    if cfg.orthonormalize_v {
        v = thin_qr(&v, flops)?.q;
    }
    substituted.sort_unstable();
    cache.refresh_count += 1;
    let factors = sort_factors(u, s, v);
    cache.v_cache = Some(factors.v.clone());
    let defect = factors.v.orthonormality_defect();
    Ok(PowerIterOutput {
        factors,
        bootstrapped: false,
        degenerate,
        substituted_columns: substituted,
        v_orthonormality_defect: defect,
        refreshed: true,
    })
}

/// Fill the listed columns of `w` with unit Gaussian directions
/// orthogonalized against every other column.
fn replace_with_random_directions<R: Rng>(w: &mut DenseMatrix, cols: &[usize], rng: &mut R) {
    let n = w.rows();
    for &j in cols {
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in 0..w.cols() {
                if c == j || cols.contains(&c) && c > j {
                    continue;
                }
                let col = w.column(c);
                let nn: f64 = col.iter().map(|a| a * a).sum();
                if nn == 0.0 {
                    continue;
                }
                let d: f64 = col.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / nn;
                x.iter_mut().zip(&col).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= norm);
        w.set_column(j, &x);
    }
}

/// Order triplets by descending scale (stable).
fn sort_factors(u: DenseMatrix, s: Vec<f64>, v: DenseMatrix) -> SvdFactors {
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    if order.iter().enumerate().all(|(a, &b)| a == b) {
        return SvdFactors { u, s, v };
    }
    let pu = DenseMatrix::from_fn(u.rows(), k, |i, j| u[(i, order[j])]);
    let pv = DenseMatrix::from_fn(v.rows(), k, |i, j| v[(i, order[j])]);
    let ps = order.iter().map(|&i| s[i]).collect();
    SvdFactors { u: pu, s: ps, v: pv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{exact_svd, mul, random_gaussian, random_orthonormal};

    /// `U diag(sigmas) V^T` with random orthonormal factors.
    fn planted(m: usize, n: usize, sigmas: &[f64], seed: u64) -> DenseMatrix {
        let mut rng = crate::seed::stream(seed, "planted", 0);
        let mut u = random_orthonormal(m, sigmas.len(), &mut rng);
        let v = random_orthonormal(n, sigmas.len(), &mut rng);
        u.scale_columns(sigmas);
        crate::matrix::mul_nt(&u, &v).unwrap()
    }

    fn gap_sigmas(r: usize, k: usize) -> Vec<f64> {
        (0..r)
            .map(|i| {
                if i < k {
                    100.0 * 0.5f64.powi(i as i32)
                } else {
                    100.0 * 0.5f64.powi(k as i32 - 1) / 10.0 * 0.97f64.powi((i - k) as i32)
                }
            })
            .collect()
    }

    /// Largest principal-angle sine between two column spans.
    fn max_sine(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let qa = thin_qr(a, &FlopCounter::new()).unwrap().q;
        let qb = thin_qr(b, &FlopCounter::new()).unwrap().q;
        let s = exact_svd(&crate::matrix::mul_tn(&qa, &qb).unwrap()).unwrap().s;
        let cmin = s.last().copied().unwrap().min(1.0);
        (1.0 - cmin * cmin).max(0.0).sqrt()
    }

    #[test]
    fn rank_one_fixed_point() {
        let mut rng = crate::seed::stream(1, "t", 0);
        let u = random_orthonormal(6, 1, &mut rng);
        let v = random_orthonormal(5, 1, &mut rng);
        let g = mul(&u, &v.transpose()).unwrap().scaled(7.0);
        let mut cache = SubspaceCache { v_cache: Some(v.clone()), ..Default::default() };
        let out = power_iteration_svd(&g, &PowerIterConfig::new(1, 1), &mut cache, &FlopCounter::new()).unwrap();
        assert!((out.factors.s[0] - 7.0).abs() < 1e-10);
        let du = out.factors.u.sub(&u).unwrap().frobenius_norm().min(out.factors.u.add(&u).unwrap().frobenius_norm());
        let dv = out.factors.v.sub(&v).unwrap().frobenius_norm().min(out.factors.v.add(&v).unwrap().frobenius_norm());
        assert!(du < 1e-10 && dv < 1e-10);
        assert!(!out.bootstrapped);
    }

    #[test]
    fn cold_start_with_gap_matches_exact() {
        let g = planted(64, 48, &gap_sigmas(48, 4), 3);
        let exact = exact_svd(&g).unwrap();
        let mut cache = SubspaceCache::new();
        let cfg = PowerIterConfig { k: 4, iters: 5, seed: 9, ..Default::default() };
        let first = power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        assert!(first.bootstrapped);
        let out = power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        for i in 0..4 {
            assert!((out.factors.s[i] - exact.s[i]).abs() <= 1e-4 * exact.s[i]);
        }
        assert_eq!(cache.bootstrap_count, 1);
        assert_eq!(cache.refresh_count, 1);
    }

    #[test]
    fn warm_start_beats_cold_start() {
        let g0 = planted(64, 48, &gap_sigmas(48, 4), 5);
        let noise = random_gaussian(64, 48, 6).scaled(0.01);
        let g1 = g0.add(&noise).unwrap();
        let truth = exact_svd(&g1).unwrap().truncate(4).v;
        let cfg = PowerIterConfig { k: 4, iters: 1, seed: 2, ..Default::default() };

        let mut warm = SubspaceCache::new();
        power_iteration_svd(&g0, &cfg, &mut warm, &FlopCounter::new()).unwrap();
        let w = power_iteration_svd(&g1, &cfg, &mut warm, &FlopCounter::new()).unwrap();

        let mut rng = crate::seed::stream(77, "cold", 0);
        let mut cold = SubspaceCache { v_cache: Some(random_orthonormal(48, 4, &mut rng)), ..Default::default() };
        let c = power_iteration_svd(&g1, &cfg, &mut cold, &FlopCounter::new()).unwrap();
        assert!(max_sine(&w.factors.v, &truth) < max_sine(&c.factors.v, &truth));
    }

    #[test]
    fn columns_are_unit_norm_and_defect_recorded() {
        let g = random_gaussian(20, 12, 4);
        let mut rng = crate::seed::stream(4, "v", 0);
        let mut cache = SubspaceCache { v_cache: Some(random_orthonormal(12, 3, &mut rng)), ..Default::default() };
        let out = power_iteration_svd(&g, &PowerIterConfig::new(3, 1), &mut cache, &FlopCounter::new()).unwrap();
        for nrm in out.factors.v.column_norms() {
            assert!((nrm - 1.0).abs() < 1e-12);
        }
        assert!(out.v_orthonormality_defect > 0.0);
        assert!(out.factors.u.orthonormality_defect() < 1e-12);
        let cfg = PowerIterConfig { orthonormalize_v: true, ..PowerIterConfig::new(3, 1) };
        let out = power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        assert!(out.v_orthonormality_defect < 1e-12);
    }

    #[test]
    fn zero_input_substitutes_directions() {
        let mut rng = crate::seed::stream(4, "v", 0);
        let mut cache = SubspaceCache { v_cache: Some(random_orthonormal(5, 2, &mut rng)), ..Default::default() };
        let out = power_iteration_svd(
            &DenseMatrix::zeros(6, 5),
            &PowerIterConfig::new(2, 1),
            &mut cache,
            &FlopCounter::new(),
        )
        .unwrap();
        assert!(out.degenerate);
        assert_eq!(out.substituted_columns, vec![0, 1]);
        assert_eq!(out.factors.s, vec![0.0, 0.0]);
        assert!(out.factors.v.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn rejects_bad_rank_and_cache_shape() {
        let g = random_gaussian(4, 3, 1);
        let mut cache = SubspaceCache::new();
        assert!(power_iteration_svd(&g, &PowerIterConfig::new(4, 1), &mut cache, &FlopCounter::new()).is_err());
        let mut cache = SubspaceCache { v_cache: Some(DenseMatrix::eye(4, 2)), ..Default::default() };
        assert!(power_iteration_svd(&g, &PowerIterConfig::new(2, 1), &mut cache, &FlopCounter::new()).is_err());
    }

    #[test]
    fn refresh_interval_skips_cache_updates() {
        let g = random_gaussian(10, 8, 2);
        let cfg = PowerIterConfig { refresh_interval: 2, ..PowerIterConfig::new(2, 1) };
        let mut cache = SubspaceCache::new();
        power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        let before = cache.v_cache.clone();
        let out = power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        assert!(!out.refreshed);
        assert_eq!(cache.v_cache, before);
        let out = power_iteration_svd(&g, &cfg, &mut cache, &FlopCounter::new()).unwrap();
        assert!(out.refreshed);
        assert_ne!(cache.v_cache, before);
    }

    #[test]
    fn flop_count_matches_model() {
        let g = random_gaussian(30, 20, 2);
        let mut rng = crate::seed::stream(4, "v", 0);
        let mut cache = SubspaceCache { v_cache: Some(random_orthonormal(20, 3, &mut rng)), ..Default::default() };
        let f = FlopCounter::new();
        power_iteration_svd(&g, &PowerIterConfig::new(3, 2), &mut cache, &f).unwrap();
        assert_eq!(f.get(), crate::spectral::cost_model::power_iteration_flops(30, 20, 3, 2));
    }
}
