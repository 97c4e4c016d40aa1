//! Learning-rate bound verification on random quadratic instances.

use serde::Serialize;
use spectra_core::seed;
use spectra_core::theory::{
    check_instance, monte_carlo_quadratic_form, random_instance, summarize, InstanceCheck, TheoryVerdict,
};

use super::run_jobs;
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{fmt_opt, OutputDir, Table};

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloRow {
    pub index: u64,
    pub mean: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    #[serde(flatten)]
    pub verdict: TheoryVerdict,
    pub monte_carlo_instances: usize,
    pub monte_carlo_max_abs_z: Option<f64>,
    pub monte_carlo_pass: bool,
    pub pass: bool,
}

impl TheorySummary {
    pub fn failure(&self) -> Option<String> {
        if self.pass {
            return None;
        }
        let v = &self.verdict;
        Some(format!(
            "theory checks failed: eq1_gridgap_max={} eq2_min_slack={} eq3_min_slack={} identity_max_error={} monte_carlo_max_abs_z={:?}",
            v.eq1_gridgap_max, v.eq2_min_slack, v.eq3_min_slack, v.identity_max_error, self.monte_carlo_max_abs_z
        ))
    }
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir, workers: usize) -> Result<TheorySummary> {
    let p = &cfg.theory;
    let root = cfg.seed;
    let idx: Vec<u64> = (0..p.instances as u64).collect();
    let checks: Vec<InstanceCheck> = run_jobs(workers, &idx, |&i| {
        let inst = random_instance(root, i, &p.instance)?;
        Ok(check_instance(&inst.model, &inst.proj)?)
    })?;
    let mut table = Table::new(&[
        "instance",
        "eta_star",
        "bound_mid",
        "bound_loose",
        "bound_mu",
        "mid_slack",
        "loose_slack",
        "mu_slack",
        "trace_slack",
        "grid_gap_cells",
        "identity_error",
    ]);
    for (i, c) in checks.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            c.eta_star.to_string(),
            c.bounds.mid.to_string(),
            c.bounds.loose.to_string(),
            fmt_opt(c.bounds.mu),
            c.mid_slack.to_string(),
            c.loose_slack.to_string(),
            fmt_opt(c.mu_slack),
            c.trace_slack.to_string(),
            c.grid_gap_cells.to_string(),
            c.identity_error.to_string(),
        ]);
    }
    out.write_csv("instances.csv", &table)?;
    let verdict = summarize(&checks);

    let mc_root = seed::derive(root, "monte-carlo", 0);
    let mc_idx: Vec<u64> = (0..p.monte_carlo_instances as u64).collect();
    let mc: Vec<MonteCarloRow> = run_jobs(workers, &mc_idx, |&i| {
        let inst = random_instance(mc_root, i, &p.instance)?;
        let est = monte_carlo_quadratic_form(&inst.model, p.monte_carlo_samples, seed::derive(mc_root, "samples", i))?;
        Ok(MonteCarloRow {
            index: i,
            mean: est.mean,
            std_error: est.std_error,
            closed_form: est.closed_form,
            z: est.z_score(),
        })
    })?;
    let mut mc_table = Table::new(&["instance", "mean", "std_error", "closed_form", "z"]);
    for r in &mc {
        mc_table.push(vec![
            r.index.to_string(),
            r.mean.to_string(),
            r.std_error.to_string(),
            r.closed_form.to_string(),
            r.z.to_string(),
        ]);
    }
    if !mc.is_empty() {
        out.write_csv("monte_carlo.csv", &mc_table)?;
    }
    let max_z = mc.iter().map(|r| r.z.abs()).reduce(f64::max);
    let mc_pass = max_z.is_none_or(|z| z <= p.monte_carlo_z);
    Ok(TheorySummary {
        pass: verdict.pass && mc_pass,
        verdict,
        monte_carlo_instances: mc.len(),
        monte_carlo_max_abs_z: max_z,
        monte_carlo_pass: mc_pass,
    })
}
