//! Reproducible experiment runs: a flat configuration in, stamped CSV files
//! out. Exit-code conventions live in the command-line layer; here a run
//! either succeeds (possibly with warnings) or returns an error.

pub mod config;
pub mod harness;
pub mod output;

pub use config::ExperimentConfig;
pub use harness::{
    auc_from_scores, build_relaxation, detection_scores, roc_from_scores, run_benchmark_trials,
    run_restart_demo, BenchmarkSpec, RestartDemo, RestartRow, RocCurve, RunSummary, StartMode,
    TrialRecord,
};
pub use output::read_direction_csv;

use std::path::PathBuf;

use crate::error::{Error, Result};

/// Run the experiment named by the `experiment` key, writing into `out_dir`.
/// Worker count comes from the `threads` key and cannot change any output
/// byte; it only schedules the same work differently.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let out_dir = PathBuf::from(cfg.get("out_dir"));
    std::fs::create_dir_all(&out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.get_usize("threads")?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.get("experiment") {
        "profile" => harness::run_profile(cfg, &out_dir),
        "roc" => harness::run_roc(cfg, &out_dir),
        "discover" => harness::run_discover(cfg, &out_dir),
        "wavefront" => harness::run_wavefront(cfg, &out_dir),
        other => Err(Error::Config(format!(
            "experiment: expected profile, roc, discover, or wavefront, got {other:?}"
        ))),
    })
}
