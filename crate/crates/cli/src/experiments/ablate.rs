//! Spectra sweep over rank ratio × power iterations × lr, one row per cell
//! and seed.

use serde::Serialize;
use spectra_core::optim::{spike_rank, OptimizerConfig, SpectraConfig};

use super::run_jobs;
use super::train::{run_job, TrainJob};
use crate::config::{RunConfig, WorkloadConfig};
use crate::error::Result;
use crate::output::{fmt_opt, fmt_u, OutputDir, Table};

#[derive(Debug, Clone, Serialize)]
pub struct AblationCell {
    pub rank_ratio: f64,
    pub power_iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub k: usize,
    pub final_loss: f64,
    pub final_tail_error: Option<f64>,
    pub diverged: bool,
    pub flops: u64,
    pub steps_to_target: Option<u64>,
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<Vec<AblationCell>> {
    let base = match cfg.optimizers.first() {
        Some(OptimizerConfig::Spectra(c)) => c.clone(),
        _ => SpectraConfig::default(),
    };
    let lrs = cfg.lr_grid.clone().unwrap_or_else(|| vec![base.lr]);
    let WorkloadConfig::SpikedQuadratic(wl) = cfg.workload.clone().expect("validated") else {
        unreachable!("validated: quadratic workload")
    };
    let mut jobs = Vec::new();
    for &r in &cfg.ablate.rank_ratios {
        for &t in &cfg.ablate.power_iters {
            for &lr in &lrs {
                for &s in &cfg.seeds {
                    let js = cfg.job_seed(s);
                    let opt = SpectraConfig {
                        rank_ratio: r,
                        power_iters: t,
                        lr,
                        seed: spectra_core::seed::derive(js, "bootstrap", 0),
                        ..base.clone()
                    };
                    let label = format!("spectra_r{r}_T{t}@{lr}");
                    jobs.push((
                        spike_rank(r, wl.m, wl.n),
                        TrainJob {
                            group: label.clone(),
                            label,
                            optimizer: OptimizerConfig::Spectra(opt),
                            lr,
                            seed: s,
                            workload: WorkloadConfig::SpikedQuadratic(wl.clone())
                                .with_seed(spectra_core::seed::derive(js, "workload", 0)),
                        },
                    ));
                }
            }
        }
    }
    let root = out.root().to_path_buf();
    let outcomes = run_jobs(workers, &jobs, |(_, j)| run_job(cfg, j, &root))?;
    let mut table = Table::new(&[
        "rank_ratio",
        "power_iters",
        "lr",
        "seed",
        "k",
        "final_loss",
        "final_tail_error",
        "diverged",
        "flops",
        "steps_to_target",
    ]);
    let mut cells = Vec::new();
    for ((k, job), o) in jobs.iter().zip(outcomes) {
        let OptimizerConfig::Spectra(c) = &job.optimizer else { unreachable!() };
        let s = o.summary;
        let primary = s.targets.iter().find(|t| t.metric == "tail_error").or_else(|| s.targets.first());
        let cell = AblationCell {
            rank_ratio: c.rank_ratio,
            power_iters: c.power_iters,
            lr: c.lr,
            seed: s.seed,
            k: *k,
            final_loss: s.final_loss,
            final_tail_error: s.final_tail_error,
            diverged: s.diverged,
            flops: s.flops,
            steps_to_target: primary.and_then(|t| t.steps),
        };
        table.push(vec![
            cell.rank_ratio.to_string(),
            cell.power_iters.to_string(),
            cell.lr.to_string(),
            cell.seed.to_string(),
            cell.k.to_string(),
            cell.final_loss.to_string(),
            fmt_opt(cell.final_tail_error),
            cell.diverged.to_string(),
            cell.flops.to_string(),
            fmt_u(cell.steps_to_target),
        ]);
        cells.push(cell);
    }
    out.write_csv("ablate.csv", &table)?;
    Ok(cells)
}
