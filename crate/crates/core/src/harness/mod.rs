// SPDX-License-Identifier: Apache-2.0

//! Experiment pipelines, metrics and result persistence.
//!
//! Every experiment returns an [`ExperimentOutput`]: the configuration it
//! ran with and a list of tidy [`ResultRow`]s. Independent instances and
//! runs fan out over a dedicated thread pool and are merged back in a fixed
//! order, so output bytes never depend on the pool size.

mod config;
mod experiments;
mod metrics;
mod output;

pub use config::{ExperimentConfig, ExperimentId, OutputFormat, TaskFamily};
pub use experiments::{
    experiment_cl_async_vs_sync, experiment_cl_vs_mp, experiment_confidence_sweep, experiment_mp_async_vs_sync, experiment_scalability,
    experiment_tune_alpha, run_experiment, tune_alpha, TunedAlpha,
};
pub use metrics::{consensus_baseline, metric_distance, metric_l2_error, metric_test_accuracy, Accuracy};
pub use output::{read_csv_rows, write_output, ExperimentOutput, ResultRow};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Map `f` over `items` on a pool of `threads` workers, keeping input order.
pub(crate) fn parallel_map<T, U, F>(threads: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}
