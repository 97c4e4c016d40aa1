//! Optimizer comparison on the quadratic and Zipf workloads, with
//! checkpointing and bitwise-exact resume.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spectra_core::optim::{AdamWConfig, OptimizerConfig, OptimizerState};
use spectra_core::workloads::{QuadraticTask, ZipfTask};
use spectra_core::{Checkpoint, DenseMatrix, FlopCounter};

use super::run_jobs;
use crate::config::{RunConfig, Schedule, WorkloadConfig};
use crate::error::{LabError, Result};
use crate::output::{fmt_opt, fmt_u, OutputDir, Table};

pub const LOSS_COLUMNS: [&str; 5] = ["optimizer", "seed", "step", "loss", "tail_error"];

#[derive(Debug, Clone)]
pub struct TrainJob {
    /// Optimizer label, `name@lr` when an lr grid is swept.
    pub label: String,
    /// Label without the lr suffix; runs are grouped by it.
    pub group: String,
    pub optimizer: OptimizerConfig,
    pub lr: f64,
    pub seed: u64,
    pub workload: WorkloadConfig,
}

impl TrainJob {
    pub fn id(&self) -> String {
        format!("{}_seed{}", self.label, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub loss: f64,
    pub tail_error: Option<f64>,
    /// Optimizer FLOPs spent before this evaluation.
    pub flops: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetHit {
    pub metric: &'static str,
    pub target: f64,
    pub steps: Option<u64>,
    pub flops: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub optimizer: String,
    pub group: String,
    pub lr: f64,
    pub seed: u64,
    pub steps_run: u64,
    pub final_loss: f64,
    pub final_tail_error: Option<f64>,
    pub diverged: bool,
    pub flops: u64,
    pub wallclock_ms: f64,
    pub resumed_from: Option<u64>,
    pub targets: Vec<TargetHit>,
    #[serde(skip)]
    pub history: Vec<StepRecord>,
}

/// Best lr of one optimizer group on one seed.
#[derive(Debug, Clone, Serialize)]
pub struct BestRun {
    pub optimizer: String,
    pub seed: u64,
    pub lr: f64,
    pub metric: Option<&'static str>,
    pub target: Option<f64>,
    pub steps: Option<u64>,
    pub final_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub runs: Vec<RunSummary>,
    pub best: Vec<BestRun>,
    pub divergent_runs: usize,
}

impl TrainReport {
    pub fn best_for(&self, group: &str, seed: u64) -> Option<&BestRun> {
        self.best.iter().find(|b| b.optimizer == group && b.seed == seed)
    }
}

/// Expand optimizers × lrs × seeds in a fixed order.
pub fn jobs(cfg: &RunConfig) -> Vec<TrainJob> {
    let workload = cfg.workload.clone().expect("validated");
    let mut counts = BTreeMap::new();
    for o in &cfg.optimizers {
        *counts.entry(o.name()).or_insert(0usize) += 1;
    }
    let mut out = Vec::new();
    for (i, o) in cfg.optimizers.iter().enumerate() {
        let group = if counts[o.name()] > 1 { format!("{}#{i}", o.name()) } else { o.name().to_string() };
        for lr in cfg.lrs_for(o) {
            let label = if cfg.lr_grid.is_some() { format!("{group}@{lr}") } else { group.clone() };
            for &seed in &cfg.seeds {
                let js = cfg.job_seed(seed);
                out.push(TrainJob {
                    label: label.clone(),
                    group: group.clone(),
                    optimizer: o.with_lr(lr).with_seed(spectra_core::seed::derive(js, "bootstrap", 0)),
                    lr,
                    seed,
                    workload: workload.with_seed(spectra_core::seed::derive(js, "workload", 0)),
                });
            }
        }
    }
    out
}

enum Task {
    Quadratic(QuadraticTask),
    Zipf(ZipfTask),
}

struct Eval {
    loss: f64,
    tail_error: Option<f64>,
    grad_w: DenseMatrix,
    grad_b: Option<DenseMatrix>,
}

impl Task {
    fn new(w: &WorkloadConfig) -> Result<Self> {
        Ok(match w {
            WorkloadConfig::SpikedQuadratic(c) => Task::Quadratic(QuadraticTask::new(c.clone())?),
            WorkloadConfig::ZipfSoftmax(c) => Task::Zipf(ZipfTask::new(c.clone())?),
            other => return Err(LabError::config(format!("workload.kind: cannot train on '{}'", other.name()))),
        })
    }

    fn init(&self) -> (DenseMatrix, Option<DenseMatrix>) {
        match self {
            Task::Quadratic(t) => (t.initial_point(), None),
            Task::Zipf(t) => {
                let (w, b) = t.initial_params();
                let n = b.len();
                (w, Some(DenseMatrix::new(1, n, b).expect("bias shape")))
            }
        }
    }

    fn eval(&self, w: &DenseMatrix, b: Option<&DenseMatrix>, step: u64) -> Result<Eval> {
        Ok(match self {
            Task::Quadratic(t) => Eval {
                loss: t.loss(w)?,
                tail_error: Some(t.relative_tail_error(w)?),
                grad_w: t.gradient(w, step)?,
                grad_b: None,
            },
            Task::Zipf(t) => {
                let batch = t.batch(w, b.expect("zipf has a bias").data(), step)?;
                let n = batch.grad_b.len();
                Eval {
                    loss: batch.loss,
                    tail_error: None,
                    grad_w: batch.grad_w,
                    grad_b: Some(DenseMatrix::new(1, n, batch.grad_b)?),
                }
            }
        })
    }
}

fn bias_config(lr: f64) -> OptimizerConfig {
    OptimizerConfig::Adamw(AdamWConfig { lr, ..AdamWConfig::default() })
}

/// Identifies the trajectory a checkpoint belongs to. The step budget is
/// left out so a run can be extended, but note that a cosine schedule
/// depends on it.
fn fingerprint(cfg: &RunConfig, job: &TrainJob) -> String {
    let value = serde_json::json!({
        "workload": job.workload,
        "optimizer": job.optimizer,
        "schedule": cfg.schedule,
    });
    hex::encode(Sha256::digest(serde_json::to_vec(&value).expect("serializable")))
}

fn checkpoint_name(step: u64) -> String {
    format!("step_{step:08}.spck")
}

/// Latest checkpoint of `job_id` under `dir` at or before `max_step`.
pub fn find_checkpoint(dir: &Path, job_id: &str, max_step: u64) -> Result<Option<(u64, PathBuf)>> {
    let base = if dir.join("checkpoints").is_dir() { dir.join("checkpoints") } else { dir.to_path_buf() };
    let job_dir = base.join(job_id);
    if !job_dir.is_dir() {
        return Ok(None);
    }
    let mut best = None;
    let entries = std::fs::read_dir(&job_dir).map_err(|e| LabError::io(format!("listing {}", job_dir.display()), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| LabError::io(format!("listing {}", job_dir.display()), e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(step) =
            name.strip_prefix("step_").and_then(|s| s.strip_suffix(".spck")).and_then(|s| s.parse::<u64>().ok())
        else {
            continue;
        };
        if step <= max_step && best.as_ref().is_none_or(|(s, _)| step > *s) {
            best = Some((step, entry.path()));
        }
    }
    Ok(best)
}

struct RunState {
    w: DenseMatrix,
    state: OptimizerState,
    bias: Option<(DenseMatrix, OptimizerState)>,
    history: Vec<StepRecord>,
    step: u64,
}

impl RunState {
    fn to_checkpoint(&self, job_id: &str, fp: &str) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new();
        ck.insert("w", self.w.clone());
        self.state.save_to(&mut ck, "opt")?;
        if let Some((b, st)) = &self.bias {
            ck.insert("bias", b.clone());
            st.save_to(&mut ck, "bias_opt")?;
        }
        ck.set_meta("job", job_id)?;
        ck.set_meta("fingerprint", fp)?;
        ck.set_meta("step", self.step)?;
        ck.set_meta("history", &self.history)?;
        Ok(ck)
    }

    fn from_checkpoint(ck: &Checkpoint, fp: &str, has_bias: bool) -> Result<Self> {
        let stored: String = ck.meta_as("fingerprint")?;
        if stored != fp {
            return Err(LabError::config(format!(
                "resume_from: checkpoint of job '{}' was written by a different workload/optimizer config",
                ck.meta_as::<String>("job").unwrap_or_default()
            )));
        }
        let bias = if has_bias {
            Some((ck.tensor("bias")?.clone(), OptimizerState::load_from(ck, "bias_opt")?))
        } else {
            None
        };
        let step: u64 = ck.meta_as("step")?;
        let history: Vec<StepRecord> = ck.meta_as("history")?;
        if history.len() as u64 != step {
            return Err(LabError::config(format!(
                "resume_from: checkpoint history has {} rows for step {step}",
                history.len()
            )));
        }
        Ok(Self { w: ck.tensor("w")?.clone(), state: OptimizerState::load_from(ck, "opt")?, bias, history, step })
    }
}

pub struct JobOutcome {
    pub summary: RunSummary,
    /// Checkpoints written, relative to the output root.
    pub checkpoints: Vec<String>,
}

/// Run one job from scratch or from the latest usable checkpoint.
/// `out_root` receives checkpoints when `checkpoint_every > 0`.
pub fn run_job(cfg: &RunConfig, job: &TrainJob, out_root: &Path) -> Result<JobOutcome> {
    let started = Instant::now();
    let task = Task::new(&job.workload)?;
    let fp = fingerprint(cfg, job);
    let id = job.id();
    let flops = FlopCounter::new();

    let resumed = match &cfg.resume_from {
        Some(dir) => match find_checkpoint(dir, &id, cfg.steps)? {
            Some((_, path)) => Some(Checkpoint::load(&path)?),
            None => {
                return Err(LabError::config(format!(
                    "resume_from: no checkpoint for job '{id}' under {}",
                    dir.display()
                )))
            }
        },
        None => None,
    };
    let mut run = match &resumed {
        Some(ck) => RunState::from_checkpoint(ck, &fp, matches!(task, Task::Zipf(_)))?,
        None => {
            let (w, b) = task.init();
            let state = job.optimizer.init_state(w.rows(), w.cols())?;
            let bias = match b {
                Some(b) => {
                    let st = bias_config(job.lr).init_state(1, b.cols())?;
                    Some((b, st))
                }
                None => None,
            };
            RunState { w, state, bias, history: Vec::new(), step: 0 }
        }
    };
    let resumed_from = resumed.as_ref().map(|_| run.step);
    if let Some(ck) = &resumed {
        flops.add(ck.meta_as::<u64>("flops")?);
    }

    let mut checkpoints = Vec::new();
    let mut diverged = false;
    let save = |run: &RunState, flops: u64, checkpoints: &mut Vec<String>| -> Result<()> {
        let rel = format!("checkpoints/{id}/{}", checkpoint_name(run.step));
        let path = out_root.join(&rel);
        std::fs::create_dir_all(path.parent().expect("has parent"))
            .map_err(|e| LabError::io(format!("creating checkpoint dir for {id}"), e))?;
        let mut ck = run.to_checkpoint(&id, &fp)?;
        ck.set_meta("flops", flops)?;
        ck.save(&path)?;
        checkpoints.push(rel);
        Ok(())
    };

    loop {
        let t = run.step;
        let ev = task.eval(&run.w, run.bias.as_ref().map(|(b, _)| b), t)?;
        run.history.push(StepRecord { loss: ev.loss, tail_error: ev.tail_error, flops: flops.get() });
        let first = run.history[0].loss;
        if !ev.loss.is_finite() || ev.loss.abs() > cfg.divergence_factor * first.abs().max(f64::MIN_POSITIVE) {
            diverged = true;
            break;
        }
        if t >= cfg.steps || (cfg.stop_on_targets && targets_met(cfg, &run.history)) {
            break;
        }
        let lr = cfg.schedule.lr(job.lr, t, cfg.steps);
        let opt = if cfg.schedule == Schedule::Constant { job.optimizer.clone() } else { job.optimizer.with_lr(lr) };
        if let Err(e) = run.state.step(&opt, &mut run.w, &ev.grad_w, &flops) {
            match e {
                spectra_core::SpectraError::NonFinite(_) => {
                    diverged = true;
                    break;
                }
                other => return Err(other.into()),
            }
        }
        if let (Some((b, st)), Some(gb)) = (run.bias.as_mut(), ev.grad_b.as_ref()) {
            st.step(&bias_config(lr), b, gb, &flops)?;
        }
        run.step += 1;
        if cfg.checkpoint_every > 0 && (run.step % cfg.checkpoint_every == 0 || run.step == cfg.steps) {
            // The history covers steps before `run.step`; the row for
            // `run.step` is recomputed after a resume.
            save(&run, flops.get(), &mut checkpoints)?;
        }
    }

    let last = *run.history.last().expect("at least one evaluation");
    let targets = target_hits(cfg, &run.history);
    Ok(JobOutcome {
        summary: RunSummary {
            optimizer: job.label.clone(),
            group: job.group.clone(),
            lr: job.lr,
            seed: job.seed,
            steps_run: run.history.len() as u64 - 1,
            final_loss: last.loss,
            final_tail_error: last.tail_error,
            diverged,
            flops: flops.get(),
            wallclock_ms: started.elapsed().as_secs_f64() * 1e3,
            resumed_from,
            targets,
            history: run.history,
        },
        checkpoints,
    })
}

fn targets_met(cfg: &RunConfig, history: &[StepRecord]) -> bool {
    let last = history.last().expect("non-empty");
    let loss_done = |t: &f64| history.iter().any(|r| r.loss <= *t);
    let tail_done =
        |t: &f64| last.tail_error.is_none() || history.iter().any(|r| r.tail_error.is_some_and(|e| e <= *t));
    let any = !cfg.targets.loss.is_empty() || !cfg.targets.tail_error.is_empty();
    any && cfg.targets.loss.iter().all(loss_done) && cfg.targets.tail_error.iter().all(tail_done)
}

fn target_hits(cfg: &RunConfig, history: &[StepRecord]) -> Vec<TargetHit> {
    let hit = |metric: &'static str, target: f64, value: &dyn Fn(&StepRecord) -> Option<f64>| {
        let first = history.iter().enumerate().find(|(_, r)| value(r).is_some_and(|v| v <= target));
        TargetHit { metric, target, steps: first.map(|(i, _)| i as u64), flops: first.map(|(_, r)| r.flops) }
    };
    let mut out: Vec<TargetHit> = cfg.targets.loss.iter().map(|&t| hit("loss", t, &|r| Some(r.loss))).collect();
    if history.first().is_some_and(|r| r.tail_error.is_some()) {
        out.extend(cfg.targets.tail_error.iter().map(|&t| hit("tail_error", t, &|r| r.tail_error)));
    }
    out
}

/// Per group and seed, the lr reaching the primary target (first tail
/// target, else first loss target) in the fewest steps, ties and misses
/// broken by the final value of that metric. Diverged runs rank last.
fn rank_key(r: &RunSummary) -> (bool, u64, f64, Option<&TargetHit>) {
    let primary =
        r.targets.iter().find(|t| t.metric == "tail_error").or_else(|| r.targets.iter().find(|t| t.metric == "loss"));
    let final_value = match primary.map(|t| t.metric) {
        Some("tail_error") => r.final_tail_error.unwrap_or(f64::INFINITY),
        _ => r.final_loss,
    };
    let final_value = if final_value.is_nan() { f64::INFINITY } else { final_value };
    (r.diverged, primary.and_then(|t| t.steps).unwrap_or(u64::MAX), final_value, primary)
}

fn pick_best(runs: &[RunSummary]) -> Vec<BestRun> {
    let mut groups: BTreeMap<(String, u64), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.group.clone(), r.seed)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((group, seed), rs)| {
            let key = rank_key;
            let best = rs
                .iter()
                .min_by(|a, b| {
                    let (ka, kb) = (key(a), key(b));
                    (ka.0, ka.1).cmp(&(kb.0, kb.1)).then(ka.2.total_cmp(&kb.2))
                })
                .expect("non-empty group");
            let (_, steps, final_value, primary) = key(best);
            BestRun {
                optimizer: group,
                seed,
                lr: best.lr,
                metric: primary.map(|t| t.metric),
                target: primary.map(|t| t.target),
                steps: (steps != u64::MAX).then_some(steps),
                final_value,
            }
        })
        .collect()
}

pub fn loss_table(runs: &[RunSummary]) -> Table {
    let mut t = Table::new(&LOSS_COLUMNS);
    for r in runs {
        for (step, rec) in r.history.iter().enumerate() {
            t.push(vec![
                r.optimizer.clone(),
                r.seed.to_string(),
                step.to_string(),
                rec.loss.to_string(),
                fmt_opt(rec.tail_error),
            ]);
        }
    }
    t
}

fn runs_table(runs: &[RunSummary]) -> Table {
    let mut t =
        Table::new(&["optimizer", "lr", "seed", "steps_run", "final_loss", "final_tail_error", "diverged", "flops"]);
    for r in runs {
        t.push(vec![
            r.optimizer.clone(),
            r.lr.to_string(),
            r.seed.to_string(),
            r.steps_run.to_string(),
            r.final_loss.to_string(),
            fmt_opt(r.final_tail_error),
            r.diverged.to_string(),
            r.flops.to_string(),
        ]);
    }
    t
}

fn targets_table(runs: &[RunSummary]) -> Table {
    let mut t = Table::new(&["optimizer", "lr", "seed", "metric", "target", "steps", "flops"]);
    for r in runs {
        for h in &r.targets {
            t.push(vec![
                r.optimizer.clone(),
                r.lr.to_string(),
                r.seed.to_string(),
                h.metric.to_string(),
                h.target.to_string(),
                fmt_u(h.steps),
                fmt_u(h.flops),
            ]);
        }
    }
    t
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<TrainReport> {
    let jobs = jobs(cfg);
    let root = out.root().to_path_buf();
    let outcomes = run_jobs(workers, &jobs, |j| run_job(cfg, j, &root))?;
    let mut runs = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        for rel in &o.checkpoints {
            out.register(rel)?;
        }
        runs.push(o.summary);
    }
    out.write_csv("loss.csv", &loss_table(&runs))?;
    out.write_csv("runs.csv", &runs_table(&runs))?;
    if runs.iter().any(|r| !r.targets.is_empty()) {
        out.write_csv("targets.csv", &targets_table(&runs))?;
    }
    let best = pick_best(&runs);
    let divergent_runs = runs.iter().filter(|r| r.diverged).count();
    Ok(TrainReport { runs, best, divergent_runs })
}
