//! Run configuration: one TOML (or JSON) file per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spectra_core::optim::{OptimizerConfig, OptimizerKind, SpectraConfig};
use spectra_core::spectral::{NsConfig, NsPrecision};
use spectra_core::theory::InstanceSpec;
use spectra_core::workloads::{ProfileConfig, QuadraticTaskConfig, SpikedStreamConfig, ZipfTaskConfig};

use crate::error::{LabError, Result};

/// Overrides the root seed of every run.
pub const SEED_ENV: &str = "SPECTRA_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Train,
    Spectrum,
    Relvar,
    Align,
    Continuity,
    Theory,
    Bench,
    Ablate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Relvar => "relvar",
            ExperimentKind::Align => "align",
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::Theory => "theory",
            ExperimentKind::Bench => "bench",
            ExperimentKind::Ablate => "ablate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadConfig {
    SpikedQuadratic(QuadraticTaskConfig),
    SpikedStream(SpikedStreamConfig),
    ZipfSoftmax(ZipfTaskConfig),
    PaperProfile(ProfileConfig),
}

impl WorkloadConfig {
    pub fn name(&self) -> &'static str {
        match self {
            WorkloadConfig::SpikedQuadratic(_) => "spiked_quadratic",
            WorkloadConfig::SpikedStream(_) => "spiked_stream",
            WorkloadConfig::ZipfSoftmax(_) => "zipf_softmax",
            WorkloadConfig::PaperProfile(_) => "paper_profile",
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            WorkloadConfig::SpikedQuadratic(c) => c.seed = seed,
            WorkloadConfig::SpikedStream(c) => c.seed = seed,
            WorkloadConfig::ZipfSoftmax(c) => c.seed = seed,
            WorkloadConfig::PaperProfile(c) => c.seed = seed,
        }
        out
    }

    pub fn validate(&self) -> spectra_core::Result<()> {
        match self {
            WorkloadConfig::SpikedQuadratic(c) => c.validate(),
            WorkloadConfig::SpikedStream(c) => c.validate(),
            WorkloadConfig::ZipfSoftmax(c) => c.validate(),
            WorkloadConfig::PaperProfile(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base lr to zero over the run.
    Cosine,
}

impl Schedule {
    pub fn lr(self, base: f64, step: u64, total: u64) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::Cosine => {
                let frac = step as f64 / total.max(1) as f64;
                // Keep the lr strictly positive so optimizer validation holds.
                (0.5 * base * (1.0 + (std::f64::consts::PI * frac).cos())).max(base * 1e-12)
            }
        }
    }
}

/// Time-to-target thresholds. Several values can be given to report
/// sensitivity to the choice of target.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Targets {
    pub loss: Vec<f64>,
    /// Relative tail-subspace error (quadratic workload only).
    pub tail_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    /// Gradients sampled (and reported) per seed.
    pub draws: usize,
    pub spike_ratio: f64,
    /// Also write every sampled gradient as an SPCM file.
    pub dump_gradients: bool,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self { draws: 1, spike_ratio: 0.015, dump_gradients: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelvarParams {
    /// Micro-batches averaged into the reference gradient.
    pub reference_batch: usize,
    pub samples: usize,
    pub micro_batch: usize,
}

impl Default for RelvarParams {
    fn default() -> Self {
        Self { reference_batch: 1024, samples: 256, micro_batch: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignParams {
    pub ns: NsConfig,
    pub head_fraction: f64,
    pub tail_fraction: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            ns: NsConfig { precision: NsPrecision::Bf16, ..NsConfig::default() },
            head_fraction: 0.015,
            tail_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityParams {
    pub warmup: u64,
    pub spectra: SpectraConfig,
}

impl Default for ContinuityParams {
    fn default() -> Self {
        Self { warmup: 10, spectra: SpectraConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryParams {
    pub instances: usize,
    pub instance: InstanceSpec,
    pub monte_carlo_instances: usize,
    pub monte_carlo_samples: usize,
    /// Largest accepted |z| of a Monte-Carlo estimate.
    pub monte_carlo_z: f64,
}

impl Default for TheoryParams {
    fn default() -> Self {
        Self {
            instances: 200,
            instance: InstanceSpec::default(),
            monte_carlo_instances: 20,
            monte_carlo_samples: 100_000,
            monte_carlo_z: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    pub shapes: Vec<[usize; 2]>,
    pub rank_ratios: Vec<f64>,
    pub iters: Vec<usize>,
    pub ns_steps: usize,
    /// Shapes with more entries than this are costed from the FLOP model
    /// instead of being executed.
    pub max_executed_entries: usize,
    pub repeats: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            shapes: vec![[256, 256], [512, 512], [1024, 1024]],
            rank_ratios: vec![0.015],
            iters: vec![1, 2, 4, 8],
            ns_steps: 5,
            max_executed_entries: 1 << 21,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateParams {
    pub rank_ratios: Vec<f64>,
    pub power_iters: Vec<usize>,
}

impl Default for AblateParams {
    fn default() -> Self {
        Self { rank_ratios: vec![0.015, 0.05, 0.1, 0.15], power_iters: vec![1, 2, 4, 8] }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_steps() -> u64 {
    100
}

fn default_divergence() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    /// Root seed; every job seed is derived from it and the listed seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub workload: Option<WorkloadConfig>,
    #[serde(default)]
    pub optimizers: Vec<OptimizerConfig>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// Replaces each optimizer's lr with every entry in turn.
    #[serde(default)]
    pub lr_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub targets: Targets,
    /// A run is stopped as diverged once its loss exceeds this multiple of
    /// the initial loss (or turns non-finite).
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
    /// End a run once every target has been reached.
    #[serde(default)]
    pub stop_on_targets: bool,
    #[serde(default)]
    pub checkpoint_every: u64,
    /// A checkpoint directory written by an earlier run.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
    #[serde(default)]
    pub spectrum: SpectrumParams,
    #[serde(default)]
    pub relvar: RelvarParams,
    #[serde(default)]
    pub align: AlignParams,
    #[serde(default)]
    pub continuity: ContinuityParams,
    #[serde(default)]
    pub theory: TheoryParams,
    #[serde(default)]
    pub bench: BenchParams,
    #[serde(default)]
    pub ablate: AblateParams,
}

impl RunConfig {
    /// Minimal config for `experiment`, writing to `output_dir`.
    pub fn new(experiment: ExperimentKind, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            output_dir: output_dir.into(),
            seed: 0,
            seeds: default_seeds(),
            workload: None,
            optimizers: Vec::new(),
            steps: default_steps(),
            lr_grid: None,
            schedule: Schedule::default(),
            targets: Targets::default(),
            divergence_factor: default_divergence(),
            stop_on_targets: false,
            checkpoint_every: 0,
            resume_from: None,
            spectrum: SpectrumParams::default(),
            relvar: RelvarParams::default(),
            align: AlignParams::default(),
            continuity: ContinuityParams::default(),
            theory: TheoryParams::default(),
            bench: BenchParams::default(),
            ablate: AblateParams::default(),
        }
    }

    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| LabError::config(format!("json: {e}")))
        } else {
            toml::from_str(text).map_err(|e| LabError::config(format!("toml: {}", e.to_string().trim_end())))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LabError::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::parse(&text)?;
        // Relative output paths are taken relative to the working directory,
        // not the config file, matching how the CLI is usually invoked.
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply the `SPECTRA_LAB_SEED` override, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| LabError::config(format!("{SEED_ENV}: expected an unsigned integer, got '{raw}'")))?;
        }
        Ok(())
    }

    /// Check every field and report all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut err = |path: &str, msg: String| errs.push(format!("{path}: {msg}"));

        if self.seeds.is_empty() {
            err("seeds", "must list at least one seed".into());
        }
        if let Some(grid) = &self.lr_grid {
            if grid.is_empty() {
                err("lr_grid", "must not be empty when given".into());
            }
            for (i, lr) in grid.iter().enumerate() {
                if !(*lr > 0.0 && lr.is_finite()) {
                    err(&format!("lr_grid[{i}]"), format!("must be positive and finite, got {lr}"));
                }
            }
        }
        for (i, o) in self.optimizers.iter().enumerate() {
            if let Err(e) = o.validate() {
                err(&format!("optimizers[{i}]"), strip(e));
            }
        }
        if let Some(w) = &self.workload {
            if let Err(e) = w.validate() {
                err(&format!("workload ({})", w.name()), strip(e));
            }
        }
        if !(self.divergence_factor > 1.0) {
            err("divergence_factor", format!("must exceed 1, got {}", self.divergence_factor));
        }
        for (i, t) in self.targets.loss.iter().enumerate() {
            if !t.is_finite() {
                err(&format!("targets.loss[{i}]"), "must be finite".into());
            }
        }
        for (i, t) in self.targets.tail_error.iter().enumerate() {
            if !(*t >= 0.0 && t.is_finite()) {
                err(&format!("targets.tail_error[{i}]"), "must be finite and nonnegative".into());
            }
        }

        let workload = self.workload.as_ref().map(WorkloadConfig::name);
        let mut need_workload = |allowed: &[&str]| match workload {
            None => {
                err("workload", format!("required for {} (one of: {})", self.experiment.name(), allowed.join(", ")))
            }
            Some(w) if !allowed.contains(&w) => err(
                "workload.kind",
                format!("{} does not support '{w}' (one of: {})", self.experiment.name(), allowed.join(", ")),
            ),
            _ => {}
        };
        match self.experiment {
            ExperimentKind::Train => need_workload(&["spiked_quadratic", "zipf_softmax"]),
            ExperimentKind::Ablate => need_workload(&["spiked_quadratic"]),
            ExperimentKind::Spectrum => {
                need_workload(&["spiked_quadratic", "spiked_stream", "zipf_softmax", "paper_profile"])
            }
            ExperimentKind::Relvar | ExperimentKind::Continuity => need_workload(&["spiked_stream"]),
            ExperimentKind::Align => need_workload(&["paper_profile", "spiked_stream"]),
            ExperimentKind::Theory | ExperimentKind::Bench => {}
        }

        let trains = matches!(self.experiment, ExperimentKind::Train | ExperimentKind::Ablate);
        if trains && self.steps == 0 {
            err("steps", "must be positive".into());
        }
        if self.experiment == ExperimentKind::Continuity && self.steps <= self.continuity.warmup {
            err("steps", format!("must exceed continuity.warmup = {}", self.continuity.warmup));
        }
        if self.experiment == ExperimentKind::Train && self.optimizers.is_empty() {
            err("optimizers", "train needs at least one optimizer".into());
        }
        if self.experiment != ExperimentKind::Train {
            if self.checkpoint_every > 0 {
                err("checkpoint_every", "only supported for train".into());
            }
            if self.resume_from.is_some() {
                err("resume_from", "only supported for train".into());
            }
        }

        match self.experiment {
            ExperimentKind::Spectrum => {
                if self.spectrum.draws == 0 {
                    err("spectrum.draws", "must be positive".into());
                }
                if !(self.spectrum.spike_ratio > 0.0 && self.spectrum.spike_ratio < 1.0) {
                    err("spectrum.spike_ratio", "must lie in (0, 1)".into());
                }
            }
            ExperimentKind::Relvar => {
                let r = &self.relvar;
                if r.reference_batch == 0 || r.micro_batch == 0 {
                    err("relvar", "reference_batch and micro_batch must be positive".into());
                }
                if r.samples < 2 {
                    err("relvar.samples", "need at least two samples".into());
                }
            }
            ExperimentKind::Align => {
                let a = &self.align;
                if a.ns.steps == 0 {
                    err("align.ns.steps", "must be positive".into());
                }
                for (path, f) in [("align.head_fraction", a.head_fraction), ("align.tail_fraction", a.tail_fraction)] {
                    if !(f > 0.0 && f <= 1.0) {
                        err(path, format!("must lie in (0, 1], got {f}"));
                    }
                }
            }
            ExperimentKind::Continuity => {
                if let Err(e) = self.continuity.spectra.validate() {
                    err("continuity.spectra", strip(e));
                }
            }
            ExperimentKind::Theory => {
                let t = &self.theory;
                if t.instances == 0 {
                    err("theory.instances", "must be positive".into());
                }
                if t.instance.min_side < 2 || t.instance.max_side < t.instance.min_side {
                    err("theory.instance", "need 2 <= min_side <= max_side".into());
                }
                if t.instance.max_batch == 0 {
                    err("theory.instance.max_batch", "must be positive".into());
                }
                if t.monte_carlo_instances > 0 && t.monte_carlo_samples < 2 {
                    err("theory.monte_carlo_samples", "need at least two samples".into());
                }
                if !(t.monte_carlo_z > 0.0) {
                    err("theory.monte_carlo_z", "must be positive".into());
                }
            }
            ExperimentKind::Bench => {
                let b = &self.bench;
                if b.shapes.is_empty() {
                    err("bench.shapes", "must not be empty".into());
                }
                for (i, [m, n]) in b.shapes.iter().enumerate() {
                    if *m.min(n) < 2 {
                        err(&format!("bench.shapes[{i}]"), format!("{m}x{n} is too small"));
                    }
                }
                if b.rank_ratios.is_empty() || b.rank_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                    err("bench.rank_ratios", "must be a non-empty list in (0, 1)".into());
                }
                if b.iters.is_empty() || b.iters.contains(&0) {
                    err("bench.iters", "must be a non-empty list of positive counts".into());
                }
                if b.ns_steps == 0 || b.repeats == 0 {
                    err("bench", "ns_steps and repeats must be positive".into());
                }
            }
            ExperimentKind::Ablate => {
                let a = &self.ablate;
                if a.rank_ratios.is_empty() || a.rank_ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    err("ablate.rank_ratios", "must be a non-empty list in (0, 1]".into());
                }
                if a.power_iters.is_empty() || a.power_iters.contains(&0) {
                    err("ablate.power_iters", "must be a non-empty list of positive counts".into());
                }
                if self.optimizers.iter().any(|o| o.kind() != OptimizerKind::Spectra) {
                    err("optimizers", "ablate sweeps spectra only; give at most one spectra block".into());
                }
                if self.optimizers.len() > 1 {
                    err("optimizers", "ablate takes at most one (spectra) optimizer block".into());
                }
            }
            ExperimentKind::Train => {}
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(LabError::Config(errs))
        }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Seed of the job for listed seed `s`.
    pub fn job_seed(&self, s: u64) -> u64 {
        spectra_core::seed::derive(self.seed, "job", s)
    }

    /// Learning rates to run `opt` at.
    pub fn lrs_for(&self, opt: &OptimizerConfig) -> Vec<f64> {
        match &self.lr_grid {
            Some(grid) => grid.clone(),
            None => vec![opt.lr()],
        }
    }
}

fn strip(e: spectra_core::SpectraError) -> String {
    match e {
        spectra_core::SpectraError::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_rejected() {
        let e = RunConfig::parse("").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("experiment"), "{e}");
    }

    #[test]
    fn errors_name_field_paths() {
        let mut cfg = RunConfig::new(ExperimentKind::Train, "out");
        cfg.seeds.clear();
        cfg.lr_grid = Some(vec![0.1, -1.0]);
        let LabError::Config(errs) = cfg.validate().unwrap_err() else { panic!() };
        let text = errs.join("\n");
        for path in ["seeds:", "lr_grid[1]:", "workload:", "optimizers:"] {
            assert!(text.contains(path), "missing {path} in {text}");
        }
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            experiment = "train"
            output_dir = "out"
            seeds = [1, 2]
            steps = 20
            [workload]
            kind = "spiked_quadratic"
            m = 8
            n = 6
            spike_count = 1
            [[optimizers]]
            kind = "spectra"
            lr = 0.1
        "#;
        let a = RunConfig::parse(toml_text).unwrap();
        let b = RunConfig::parse(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = RunConfig::parse("experiment = \"theory\"\noutput_dir = \"o\"\nstepz = 3\n").unwrap_err();
        assert!(e.to_string().contains("stepz"));
        let e = RunConfig::parse(
            "experiment = \"theory\"\noutput_dir = \"o\"\n[workload]\nkind = \"spiked_stream\"\nmm = 3\n",
        );
        assert!(e.is_err());
    }

    #[test]
    fn cosine_schedule_decays() {
        assert_eq!(Schedule::Cosine.lr(1.0, 0, 10), 1.0);
        assert!((Schedule::Cosine.lr(1.0, 5, 10) - 0.5).abs() < 1e-12);
        assert!(Schedule::Cosine.lr(1.0, 10, 10) > 0.0);
        assert_eq!(Schedule::Constant.lr(0.3, 7, 10), 0.3);
    }
}
