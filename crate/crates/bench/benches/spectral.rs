use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spectra_bench::{spiked_gradient, SHAPES};
use spectra_core::optim::spike_rank;
use spectra_core::spectral::{newton_schulz, power_iteration_svd, PowerIterConfig, SubspaceCache};
use spectra_core::FlopCounter;

fn orthogonalize(c: &mut Criterion) {
    let mut group = c.benchmark_group("orthogonalize");
    group.sample_size(10);
    for (m, n) in SHAPES {
        let g = spiked_gradient(m, n, 7);
        let id = format!("{m}x{n}");
        group.bench_with_input(BenchmarkId::new("NS5", &id), &g, |b, g| {
            b.iter(|| newton_schulz(g, 5, &FlopCounter::new()).unwrap())
        });
        let k = spike_rank(0.015, m, n);
        for t in [1, 4] {
            let cfg = PowerIterConfig::new(k, t);
            let mut warm = SubspaceCache::new();
            power_iteration_svd(&g, &cfg, &mut warm, &FlopCounter::new()).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("PI_{t}"), &id), &g, |b, g| {
                b.iter(|| power_iteration_svd(g, &cfg, &mut warm.clone(), &FlopCounter::new()).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, orthogonalize);
criterion_main!(benches);
