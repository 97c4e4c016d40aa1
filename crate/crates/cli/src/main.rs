use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectra_lab::config::{BenchParams, TheoryParams};
use spectra_lab::{run, ExperimentKind, LabError, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "spectra-lab", version, about = "Run spectra optimizer experiments from config files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Replace the output directory if it exists.
        #[arg(long)]
        force: bool,
        /// Parallel jobs (seeds and grid cells).
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// FLOP and timing comparison of Newton–Schulz and power iteration.
    Bench {
        /// Shapes as MxN, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "256x256,512x512,1024x1024")]
        sizes: Vec<String>,
        /// Spike rank ratios.
        #[arg(long, value_delimiter = ',', default_value = "0.015")]
        ranks: Vec<f64>,
        /// Power-iteration counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        iters: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Check the learning-rate bounds on random quadratic instances.
    Theory {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        mc_instances: usize,
        #[arg(long, default_value_t = 100_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "theory-out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn parse_shape(s: &str) -> Result<[usize; 2], LabError> {
    let bad = || LabError::config(format!("--sizes: expected MxN, got '{s}'"));
    let (m, n) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok([m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?])
}

fn build(cmd: Command) -> Result<(RunConfig, RunOptions), LabError> {
    match cmd {
        Command::Run { config, force, workers } => Ok((RunConfig::load(&config)?, RunOptions { force, workers })),
        Command::Bench { sizes, ranks, iters, repeats, out, force } => {
            let mut cfg = RunConfig::new(ExperimentKind::Bench, out);
            cfg.bench = BenchParams {
                shapes: sizes.iter().map(|s| parse_shape(s)).collect::<Result<_, _>>()?,
                rank_ratios: ranks,
                iters,
                repeats,
                ..BenchParams::default()
            };
            cfg.apply_env()?;
            Ok((cfg, RunOptions { force, workers: 1 }))
        }
        Command::Theory { instances, mc_instances, mc_samples, seed, out, force, workers } => {
            let mut cfg = RunConfig::new(ExperimentKind::Theory, out);
            cfg.seed = seed;
            cfg.theory = TheoryParams {
                instances,
                monte_carlo_instances: mc_instances,
                monte_carlo_samples: mc_samples,
                ..TheoryParams::default()
            };
            cfg.apply_env()?;
            Ok((cfg, RunOptions { force, workers }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli.command).and_then(|(cfg, opts)| run(&cfg, &opts));
    match result {
        Ok(outcome) => {
            println!(
                "wrote {} files to {} (see summary.json)",
                outcome.manifest.len() + 1,
                outcome.output_dir.display()
            );
            match outcome.failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
