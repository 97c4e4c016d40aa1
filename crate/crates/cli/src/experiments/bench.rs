//! FLOP and wall-clock comparison of Newton–Schulz against warm-started
//! power iteration.

use std::time::Instant;

use serde::Serialize;
use spectra_core::matrix::random_gaussian;
use spectra_core::optim::spike_rank;
use spectra_core::spectral::{cost_model, newton_schulz, power_iteration_svd, PowerIterConfig, SubspaceCache};
use spectra_core::{seed, FlopCounter};

use crate::config::BenchParams;
use crate::error::Result;
use crate::output::{fmt_opt, OutputDir, Table};

pub const BENCH_COLUMNS: [&str; 8] = ["m", "n", "method", "T", "k", "flops", "wallclock_ms", "source"];

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    /// `NS5` or `PI_<T>`.
    pub method: String,
    pub t: usize,
    pub k: usize,
    pub flops: u64,
    pub wallclock_ms: Option<f64>,
    /// `counter` when executed, `model` when costed analytically.
    pub source: &'static str,
}

impl BenchRow {
    pub fn is_ns(&self) -> bool {
        self.method.starts_with("NS")
    }
}

fn mean_ms(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        total += t.elapsed().as_secs_f64() * 1e3;
    }
    Ok(total / repeats as f64)
}

/// One NS row and one `PI_T` row per iteration count, per shape.
pub fn measure(p: &BenchParams, root: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let cells = p.shapes.iter().enumerate().flat_map(|(si, s)| p.rank_ratios.iter().map(move |&r| (si, *s, r)));
    for (si, [m, n], ratio) in cells {
        let k = spike_rank(ratio, m, n);
        let execute = m * n <= p.max_executed_entries;
        let ns_name = format!("NS{}", p.ns_steps);
        if execute {
            let g = random_gaussian(m, n, seed::derive(root, "bench", si as u64));
            let counter = FlopCounter::new();
            newton_schulz(&g, p.ns_steps, &counter)?;
            let flops = counter.get();
            let ms = mean_ms(p.repeats, || Ok(newton_schulz(&g, p.ns_steps, &FlopCounter::new()).map(|_| ())?))?;
            rows.push(BenchRow {
                m,
                n,
                method: ns_name,
                t: p.ns_steps,
                k,
                flops,
                wallclock_ms: Some(ms),
                source: "counter",
            });
            for &t in &p.iters {
                let cfg = PowerIterConfig {
                    seed: seed::derive(root, "bench-sketch", si as u64),
                    ..PowerIterConfig::new(k, t)
                };
                let mut warm = SubspaceCache::new();
                power_iteration_svd(&g, &cfg, &mut warm, &FlopCounter::new())?;
                let counter = FlopCounter::new();
                power_iteration_svd(&g, &cfg, &mut warm.clone(), &counter)?;
                let ms = mean_ms(p.repeats, || {
                    Ok(power_iteration_svd(&g, &cfg, &mut warm.clone(), &FlopCounter::new()).map(|_| ())?)
                })?;
                rows.push(BenchRow {
                    m,
                    n,
                    method: format!("PI_{t}"),
                    t,
                    k,
                    flops: counter.get(),
                    wallclock_ms: Some(ms),
                    source: "counter",
                });
            }
        } else {
            rows.push(BenchRow {
                m,
                n,
                method: ns_name,
                t: p.ns_steps,
                k,
                flops: cost_model::newton_schulz_flops(m, n, p.ns_steps),
                wallclock_ms: None,
                source: "model",
            });
            for &t in &p.iters {
                rows.push(BenchRow {
                    m,
                    n,
                    method: format!("PI_{t}"),
                    t,
                    k,
                    flops: cost_model::power_iteration_flops(m, n, k, t),
                    wallclock_ms: None,
                    source: "model",
                });
            }
        }
    }
    Ok(rows)
}

pub fn table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(&BENCH_COLUMNS);
    for r in rows {
        t.push(vec![
            r.m.to_string(),
            r.n.to_string(),
            r.method.clone(),
            r.t.to_string(),
            r.k.to_string(),
            r.flops.to_string(),
            fmt_opt(r.wallclock_ms),
            r.source.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRatio {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// `flops(NS) / flops(PI_1)`; absent when `T = 1` was not measured.
    pub ns_over_pi1: Option<f64>,
}

pub fn ratios(rows: &[BenchRow]) -> Vec<BenchRatio> {
    rows.iter()
        .filter(|r| r.is_ns())
        .map(|ns| {
            let pi1 = rows.iter().find(|r| r.m == ns.m && r.n == ns.n && r.k == ns.k && r.method == "PI_1");
            BenchRatio { m: ns.m, n: ns.n, k: ns.k, ns_over_pi1: pi1.map(|p| ns.flops as f64 / p.flops as f64) }
        })
        .collect()
}

pub fn run(p: &BenchParams, root: u64, out: &mut OutputDir) -> Result<Vec<BenchRatio>> {
    let rows = measure(p, root)?;
    out.write_csv("bench.csv", &table(&rows))?;
    Ok(ratios(&rows))
}
