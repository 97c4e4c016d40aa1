use criterion::{criterion_group, criterion_main, Criterion};
use spectra_bench::spiked_gradient;
use spectra_core::optim::{AdamWConfig, MuonConfig, OptimizerConfig, SpectraConfig};
use spectra_core::{DenseMatrix, FlopCounter};

fn steps(c: &mut Criterion) {
    let (m, n) = (256, 256);
    let g = spiked_gradient(m, n, 11);
    let configs = [
        OptimizerConfig::Adamw(AdamWConfig::default()),
        OptimizerConfig::Muon(MuonConfig::default()),
        OptimizerConfig::Spectra(SpectraConfig::default()),
    ];
    let mut group = c.benchmark_group("step_256x256");
    group.sample_size(20);
    for cfg in configs {
        let mut w = DenseMatrix::zeros(m, n);
        let mut st = cfg.init_state(m, n).unwrap();
        // Warm the state so Spectra measures the cached path.
        st.step(&cfg, &mut w, &g, &FlopCounter::new()).unwrap();
        group.bench_function(cfg.name(), |b| b.iter(|| st.step(&cfg, &mut w, &g, &FlopCounter::new()).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
