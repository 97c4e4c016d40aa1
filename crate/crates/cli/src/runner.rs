//! Dispatch a validated config to its experiment and assemble the report.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::config::{ExperimentKind, RunConfig};
use crate::error::{LabError, Result};
use crate::experiments::ablate::{self, AblationCell};
use crate::experiments::bench::{self, BenchRatio};
use crate::experiments::diagnose::{self, AlignSummary, ContinuitySummary, RelvarSummary, SpectrumSummary};
use crate::experiments::theory::{self, TheorySummary};
use crate::experiments::train::{self, TrainReport};
use crate::output::{ManifestEntry, OutputDir};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub force: bool,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { force: false, workers: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Report {
    Train(TrainReport),
    Spectrum(Vec<SpectrumSummary>),
    Relvar(RelvarSummary),
    Align(AlignSummary),
    Continuity(ContinuitySummary),
    Theory(TheorySummary),
    Bench(Vec<BenchRatio>),
    Ablate(Vec<AblationCell>),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub report: Report,
    pub manifest: Vec<ManifestEntry>,
    /// Set when a property check inside the run failed; maps to exit code 2.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    wallclock_ms: f64,
    failure: &'a Option<String>,
    result: &'a Report,
}

fn reject_self_resume(cfg: &RunConfig) -> Result<()> {
    let (Some(resume), true) = (&cfg.resume_from, cfg.output_dir.exists()) else {
        return Ok(());
    };
    let canon = |p: &PathBuf| p.canonicalize().unwrap_or_else(|_| p.clone());
    if canon(resume).starts_with(canon(&cfg.output_dir)) {
        return Err(LabError::config("resume_from: must not lie inside output_dir, which is replaced on --force"));
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    reject_self_resume(cfg)?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cfg.output_dir, opts.force)?;
    let hash = cfg.content_hash();
    out.write_json("config.json", cfg)?;
    let w = opts.workers.max(1);
    let report = match cfg.experiment {
        ExperimentKind::Train => Report::Train(train::run(cfg, &mut out, w)?),
        ExperimentKind::Spectrum => Report::Spectrum(diagnose::spectrum(cfg, &mut out, w)?),
        ExperimentKind::Relvar => Report::Relvar(diagnose::relvar_experiment(cfg, &mut out, w)?),
        ExperimentKind::Align => Report::Align(diagnose::align(cfg, &mut out, w)?),
        ExperimentKind::Continuity => Report::Continuity(diagnose::continuity(cfg, &mut out, w)?),
        ExperimentKind::Theory => Report::Theory(theory::run(cfg, &mut out, w)?),
        ExperimentKind::Bench => Report::Bench(bench::run(&cfg.bench, cfg.seed, &mut out)?),
        ExperimentKind::Ablate => Report::Ablate(ablate::run(cfg, &mut out, w)?),
    };
    let failure = match &report {
        Report::Theory(t) => t.failure(),
        _ => None,
    };
    let summary = Summary {
        experiment: cfg.experiment.name(),
        config_hash: &hash,
        seed: cfg.seed,
        wallclock_ms: started.elapsed().as_secs_f64() * 1e3,
        failure: &failure,
        result: &report,
    };
    out.write_json("summary.json", &summary)?;
    let manifest = out.finish(cfg.experiment.name(), &hash)?;
    Ok(RunOutcome { output_dir: cfg.output_dir.clone(), report, manifest, failure })
}
