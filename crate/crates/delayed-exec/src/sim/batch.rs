use rayon::prelude::*;

use super::SimError;

/// Runs independent jobs on a pool of `workers` threads (one per core when
/// `None`). Results come back in job order, so the output does not depend on
/// scheduling.
pub fn run_batch<J, R, F>(jobs: &[J], workers: Option<usize>, f: F) -> Result<Vec<R>, SimError>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R, SimError> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(SimError::Config("workers must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}
