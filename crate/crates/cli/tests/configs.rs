//! The sample configs shipped in `configs/` parse, validate, and run when
//! shortened.

use std::path::PathBuf;

use spectra_lab::{run, RunConfig, RunOptions};

fn sample_configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn sample_configs_run_when_shortened() {
    let paths = sample_configs();
    assert!(paths.len() >= 4, "{paths:?}");
    let tmp = tempfile::tempdir().unwrap();
    for path in paths {
        let mut cfg = RunConfig::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.output_dir = tmp.path().join(path.file_stem().unwrap());
        cfg.steps = cfg.steps.min(12);
        cfg.checkpoint_every = cfg.checkpoint_every.min(6);
        cfg.theory.instances = cfg.theory.instances.min(20);
        cfg.theory.monte_carlo_instances = cfg.theory.monte_carlo_instances.min(2);
        cfg.theory.monte_carlo_samples = cfg.theory.monte_carlo_samples.min(5000);
        let out = run(&cfg, &RunOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(out.output_dir.join("summary.json").exists());
    }
}
