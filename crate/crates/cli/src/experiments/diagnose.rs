//! Gradient diagnostics: spectrum, relative variance, Newton–Schulz
//! alignment and subspace continuity.

use serde::Serialize;
use spectra_core::diagnostics::{
    loglog_slope, mean_canonical_correlation, ns_alignment_with, relvar, spearman, spectrum_report, subspace_similarity,
};
use spectra_core::matrix::io::spcm_bytes;
use spectra_core::matrix::{exact_svd, gaussian_from_rng, thin_qr};
use spectra_core::optim::{spectra_step, SpectraState};
use spectra_core::seed;
use spectra_core::workloads::{paper_profile, QuadraticTask, SpikedStream, ZipfTask};
use spectra_core::{DenseMatrix, FlopCounter};

use super::run_jobs;
use crate::config::{RunConfig, WorkloadConfig};
use crate::error::Result;
use crate::output::{OutputDir, Table};

fn seeded_workload(cfg: &RunConfig, s: u64) -> WorkloadConfig {
    let js = cfg.job_seed(s);
    cfg.workload.as_ref().expect("validated").with_seed(seed::derive(js, "workload", 0))
}

fn stream_for(cfg: &RunConfig, s: u64) -> Result<SpikedStream> {
    match seeded_workload(cfg, s) {
        WorkloadConfig::SpikedStream(c) => Ok(SpikedStream::new(c)?),
        _ => unreachable!("validated: stream workload"),
    }
}

/// `draws` gradient samples of the workload for one seed.
fn sample_gradients(cfg: &RunConfig, s: u64, draws: usize) -> Result<Vec<DenseMatrix>> {
    Ok(match seeded_workload(cfg, s) {
        WorkloadConfig::SpikedQuadratic(c) => {
            let t = QuadraticTask::new(c)?;
            let w = t.initial_point();
            (0..draws as u64).map(|d| t.gradient(&w, d)).collect::<spectra_core::Result<_>>()?
        }
        WorkloadConfig::SpikedStream(c) => {
            let mut st = SpikedStream::new(c)?;
            (0..draws).map(|_| st.next_gradient()).collect()
        }
        WorkloadConfig::ZipfSoftmax(c) => {
            let t = ZipfTask::new(c)?;
            let (w, b) = t.initial_params();
            (0..draws as u64).map(|d| t.batch(&w, &b, d).map(|x| x.grad_w)).collect::<spectra_core::Result<_>>()?
        }
        WorkloadConfig::PaperProfile(c) => (0..draws as u64)
            .map(|d| {
                let mut c = c.clone();
                c.seed = seed::derive(c.seed, "draw", d);
                paper_profile(&c)
            })
            .collect::<spectra_core::Result<_>>()?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub seed: u64,
    pub draw: usize,
    pub spike_count: usize,
    pub gap_ratio: f64,
    pub spike_energy_share: f64,
    pub top_sigma: f64,
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<Vec<SpectrumSummary>> {
    let p = &cfg.spectrum;
    let per_seed = run_jobs(workers, &cfg.seeds, |&s| {
        let grads = sample_gradients(cfg, s, p.draws)?;
        let reports =
            grads.iter().map(|g| spectrum_report(g, p.spike_ratio)).collect::<spectra_core::Result<Vec<_>>>()?;
        Ok((s, grads, reports))
    })?;
    let mut table = Table::new(&["seed", "draw", "index", "sigma", "cdf"]);
    let mut summary = Vec::new();
    for (s, grads, reports) in per_seed {
        for (d, (g, r)) in grads.iter().zip(&reports).enumerate() {
            for (i, (sig, c)) in r.sigmas.iter().zip(&r.cdf).enumerate() {
                table.push(vec![s.to_string(), d.to_string(), (i + 1).to_string(), sig.to_string(), c.to_string()]);
            }
            summary.push(SpectrumSummary {
                seed: s,
                draw: d,
                spike_count: r.spike_count,
                gap_ratio: r.gap_ratio,
                spike_energy_share: r.energy_share(r.spike_count),
                top_sigma: r.sigmas[0],
            });
            if p.dump_gradients {
                out.write(&format!("gradients/seed{s}_draw{d}.spcm"), &spcm_bytes(g))?;
            }
        }
    }
    out.write_csv("spectrum.csv", &table)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct RelvarSeed {
    pub seed: u64,
    /// Spearman correlation between direction index and RelVar.
    pub spearman: f64,
    pub excluded: usize,
    /// Log–log slope of RelVar against sigma under isotropic noise around
    /// the same reference gradient; −2 in closed form.
    pub isotropic_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelvarSummary {
    pub seeds: Vec<RelvarSeed>,
    pub mean_spearman: f64,
    pub mean_isotropic_slope: f64,
}

pub fn relvar_experiment(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<RelvarSummary> {
    let p = &cfg.relvar;
    let per_seed = run_jobs(workers, &cfg.seeds, |&s| {
        let mut stream = stream_for(cfg, s)?;
        let gbar = stream.next_batch(p.reference_batch);
        let samples: Vec<DenseMatrix> = (0..p.samples).map(|_| stream.next_batch(p.micro_batch)).collect();
        let report = relvar(&gbar, &samples, p.micro_batch)?;
        let ks: Vec<f64> = report.entries.iter().map(|e| e.k as f64).collect();
        let rho = spearman(&ks, &report.relvars());

        let mut rng = seed::stream(cfg.job_seed(s), "isotropic-noise", 0);
        let iso: Vec<DenseMatrix> = (0..p.samples)
            .map(|_| gbar.add(&gaussian_from_rng(gbar.rows(), gbar.cols(), &mut rng)))
            .collect::<spectra_core::Result<_>>()?;
        let iso = relvar(&gbar, &iso, 1)?;
        let sig: Vec<f64> = iso.entries.iter().map(|e| e.sigma_k).collect();
        let slope = loglog_slope(&sig, &iso.relvars());
        Ok((report, RelvarSeed { seed: s, spearman: rho, excluded: 0, isotropic_slope: slope }))
    })?;
    let mut table = Table::new(&["seed", "k", "sigma_k", "var_a_k", "relvar_k"]);
    let mut seeds = Vec::new();
    for (report, mut row) in per_seed {
        for e in &report.entries {
            table.push(vec![
                row.seed.to_string(),
                e.k.to_string(),
                e.sigma_k.to_string(),
                e.var_a_k.to_string(),
                e.relvar_k.to_string(),
            ]);
        }
        row.excluded = report.excluded.len();
        seeds.push(row);
    }
    out.write_csv("relvar.csv", &table)?;
    let n = seeds.len() as f64;
    Ok(RelvarSummary {
        mean_spearman: seeds.iter().map(|s| s.spearman).sum::<f64>() / n,
        mean_isotropic_slope: seeds.iter().map(|s| s.isotropic_slope).sum::<f64>() / n,
        seeds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignSeed {
    pub seed: u64,
    pub head_mean: f64,
    pub tail_mean: f64,
    pub split: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignSummary {
    pub seeds: Vec<AlignSeed>,
    pub mean_split: f64,
    pub min_split: f64,
}

pub fn align(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<AlignSummary> {
    let p = &cfg.align;
    let per_seed = run_jobs(workers, &cfg.seeds, |&s| {
        let (g, sigmas) = match seeded_workload(cfg, s) {
            WorkloadConfig::PaperProfile(c) => (paper_profile(&c)?, c.sigmas()),
            WorkloadConfig::SpikedStream(c) => {
                let g = SpikedStream::new(c)?.next_gradient();
                let s = exact_svd(&g)?.s;
                (g, s)
            }
            _ => unreachable!("validated: align workload"),
        };
        let report = ns_alignment_with(&g, &p.ns)?;
        let (head, tail) = (report.head_mean(p.head_fraction), report.tail_mean(p.tail_fraction));
        Ok((report, sigmas, AlignSeed { seed: s, head_mean: head, tail_mean: tail, split: head - tail }))
    })?;
    let mut table = Table::new(&["seed", "index", "sigma", "align"]);
    let mut seeds = Vec::new();
    for (report, sigmas, row) in per_seed {
        for (i, (a, sg)) in report.align.iter().zip(&sigmas).enumerate() {
            table.push(vec![row.seed.to_string(), (i + 1).to_string(), sg.to_string(), a.to_string()]);
        }
        seeds.push(row);
    }
    out.write_csv("align.csv", &table)?;
    Ok(AlignSummary {
        mean_split: seeds.iter().map(|s| s.split).sum::<f64>() / seeds.len() as f64,
        min_split: seeds.iter().map(|s| s.split).fold(f64::INFINITY, f64::min),
        seeds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuitySeed {
    pub seed: u64,
    /// Minimum consecutive-step similarity after warmup.
    pub min_similarity: f64,
    pub min_mean_correlation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuitySummary {
    pub seeds: Vec<ContinuitySeed>,
    pub min_similarity: f64,
}

/// Track Spectra's cached subspace on the stream; each row compares the
/// cache after step `step` with the one after the previous step.
pub fn continuity(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<ContinuitySummary> {
    let p = &cfg.continuity;
    let per_seed = run_jobs(workers, &cfg.seeds, |&s| {
        let mut stream = stream_for(cfg, s)?;
        let (m, n) = (stream.config().m, stream.config().n);
        let opt = spectra_core::optim::SpectraConfig {
            seed: seed::derive(cfg.job_seed(s), "bootstrap", 0),
            ..p.spectra.clone()
        };
        let mut state = SpectraState::new(m, n, &opt)?;
        let mut w = DenseMatrix::zeros(m, n);
        let flops = FlopCounter::new();
        let mut prev: Option<DenseMatrix> = None;
        let mut rows = Vec::new();
        for step in 0..cfg.steps {
            let g = stream.next_gradient();
            spectra_step(&mut w, &g, &mut state, &opt, &flops)?;
            let v = state.cache.v_cache.as_ref().expect("cache filled after a step");
            let q = thin_qr(v, &flops)?.q;
            if let Some(pq) = &prev {
                rows.push((step, subspace_similarity(pq, &q)?, mean_canonical_correlation(pq, &q)?));
            }
            prev = Some(q);
        }
        Ok((s, rows))
    })?;
    let mut table = Table::new(&["seed", "step", "similarity", "mean_correlation"]);
    let mut seeds = Vec::new();
    for (s, rows) in per_seed {
        let (mut min_sim, mut min_mean) = (f64::INFINITY, f64::INFINITY);
        for &(step, sim, mean) in &rows {
            table.push(vec![s.to_string(), step.to_string(), sim.to_string(), mean.to_string()]);
            if step >= p.warmup {
                min_sim = min_sim.min(sim);
                min_mean = min_mean.min(mean);
            }
        }
        seeds.push(ContinuitySeed { seed: s, min_similarity: min_sim, min_mean_correlation: min_mean });
    }
    out.write_csv("continuity.csv", &table)?;
    Ok(ContinuitySummary {
        min_similarity: seeds.iter().map(|s| s.min_similarity).fold(f64::INFINITY, f64::min),
        seeds,
    })
}
