//! Seeded multi-run experiments: JSON configuration, per-seed runs with
//! incremental persistence, aggregation over seeds, CSV and SVG output.

mod aggregate;
mod compare;
mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};

pub use aggregate::{aggregate, clip_rewards_for_plot, AggregateCurve};
pub use compare::{find_results, plot_dir, run_compare, train_to_dir, CompareOutcome, DEFAULT_CLIP_FLOOR, RESULTS_CSV};
pub use config::{load_config, Algo, ExperimentConfig};
pub use output::{aggregate_path, emit_csv, emit_plot, format_f64, read_results_csv, render_svg, timing_path};
pub use run::{
    prepare_core, record_path, run_experiment, run_experiment_with, run_seed, thread_count_from_env, ExperimentOutcome,
    RunFailure, RunRecord, SharedCore,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("no run records")]
    NoRecords,
    #[error("run failed: {0}")]
    Run(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}
