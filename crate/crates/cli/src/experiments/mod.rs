pub mod ablate;
pub mod bench;
pub mod diagnose;
pub mod theory;
pub mod train;

use rayon::prelude::*;

use crate::error::{LabError, Result};

/// Run `f` over `jobs` on a pool of `workers` threads. Results come back in
/// job order regardless of scheduling.
pub fn run_jobs<J, T, F>(workers: usize, jobs: &[J], f: F) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::config(format!("workers: cannot start thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_job_order() {
        let jobs: Vec<u64> = (0..50).collect();
        let out = run_jobs(4, &jobs, |j| Ok(j * j)).unwrap();
        assert_eq!(out, jobs.iter().map(|j| j * j).collect::<Vec<_>>());
        let err = run_jobs(2, &jobs, |j| if *j == 7 { Err(LabError::Property("x".into())) } else { Ok(*j) });
        assert!(err.is_err());
    }
}
