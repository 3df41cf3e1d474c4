use std::path::{Path, PathBuf};

use super::aggregate::{aggregate, AggregateCurve};
use super::config::{load_config, ExperimentConfig};
use super::output::{emit_csv, emit_plot, read_results_csv};
use super::run::{run_experiment_with, thread_count_from_env, ExperimentOutcome};
use super::HarnessError;

/// File name of the per-experiment results CSV.
pub const RESULTS_CSV: &str = "results.csv";
pub const DEFAULT_CLIP_FLOOR: f64 = -10.0;

/// Runs `config` into `dir` and writes its results CSV and aggregate.
pub fn train_to_dir(config: &ExperimentConfig, threads: usize, dir: &Path) -> Result<(ExperimentOutcome, AggregateCurve), HarnessError> {
    let outcome = run_experiment_with(config, threads, Some(dir))?;
    for f in &outcome.failures {
        log::warn!("{} seed {} failed: {}", config.algo, f.seed, f.message);
    }
    let agg = aggregate(&outcome.records)?;
    emit_csv(&outcome.records, &agg, &dir.join(RESULTS_CSV))?;
    Ok((outcome, agg))
}

/// Results CSVs in `dir` itself and its immediate subdirectories, sorted.
pub fn find_results(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut found = Vec::new();
    let direct = dir.join(RESULTS_CSV);
    if direct.is_file() {
        found.push(direct);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut subdirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    found.extend(subdirs.into_iter().map(|d| d.join(RESULTS_CSV)).filter(|p| p.is_file()));
    Ok(found)
}

/// Aggregates every results CSV under `dir` and plots them together.
pub fn plot_dir(dir: &Path, svg: &Path, clip_floor: f64) -> Result<Vec<AggregateCurve>, HarnessError> {
    let mut aggregates = Vec::new();
    for csv in find_results(dir)? {
        aggregates.push(aggregate(&read_results_csv(&csv)?)?);
    }
    if aggregates.is_empty() {
        return Err(HarnessError::Invalid(format!("no {RESULTS_CSV} under {}", dir.display())));
    }
    emit_plot(&aggregates, svg, clip_floor)?;
    Ok(aggregates)
}

pub struct CompareOutcome {
    pub aggregates: Vec<AggregateCurve>,
    pub plot: PathBuf,
}

/// Runs every `*.json` config in `config_dir` (sorted by name) into
/// `out/<stem>/`, then writes `out/comparison.svg` and its timing CSV.
/// `threads` of `None` reads `PPOPT_THREADS` per experiment.
pub fn run_compare(config_dir: &Path, out: &Path, threads: Option<usize>, clip_floor: f64) -> Result<CompareOutcome, HarnessError> {
    let entries = std::fs::read_dir(config_dir).map_err(|e| HarnessError::io(config_dir, e))?;
    let mut configs: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
    configs.sort();
    if configs.is_empty() {
        return Err(HarnessError::Invalid(format!("no .json configs in {}", config_dir.display())));
    }
    let mut aggregates = Vec::new();
    for path in &configs {
        let mut config = load_config(path)?;
        if let Some(p) = &config.pretrained {
            if p.is_relative() {
                config.pretrained = Some(config_dir.join(p));
            }
        }
        let stem = path.file_stem().expect("json file").to_string_lossy().into_owned();
        let dir = out.join(&stem);
        log::info!("running {} from {}", config.algo, path.display());
        let threads = threads.unwrap_or_else(|| thread_count_from_env(config.seeds.len()));
        aggregates.push(train_to_dir(&config, threads, &dir)?.1);
    }
    let plot = out.join("comparison.svg");
    emit_plot(&aggregates, &plot, clip_floor)?;
    Ok(CompareOutcome { aggregates, plot })
}
