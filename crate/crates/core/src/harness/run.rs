use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyna::train_dyna_ddpg;
use crate::envsim::{EnvSpec, Environment};
use crate::nn::{params_hash, read_param_file, ParamStore};
use crate::ppo::{train_ppo, LearningCurve};
use crate::ppopt::{extract_core, pretrain, train_from_core};

use super::config::{Algo, ExperimentConfig};
use super::HarnessError;

/// Result of one seeded training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algo: Algo,
    pub seed: u64,
    pub returns: Vec<f64>,
    /// Wall-clock milliseconds since the training loop started, per episode.
    pub cum_time_ms: Vec<f64>,
    /// Equal to the last entry of `cum_time_ms`.
    pub total_ms: f64,
    pub config_hash: String,
}

impl RunRecord {
    pub fn from_curve(algo: Algo, seed: u64, curve: &LearningCurve, config_hash: String) -> Self {
        Self {
            algo,
            seed,
            returns: curve.returns.clone(),
            cum_time_ms: curve.cum_time_ms.clone(),
            total_ms: curve.cum_time_ms.last().copied().unwrap_or(0.0),
            config_hash,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.returns.len() != self.cum_time_ms.len() {
            return Err(HarnessError::Invalid(format!("seed {}: returns and timings differ in length", self.seed)));
        }
        if self.returns.iter().any(|r| !r.is_finite()) {
            return Err(HarnessError::Invalid(format!("seed {}: non-finite return", self.seed)));
        }
        if self.cum_time_ms.windows(2).any(|w| w[1] < w[0]) {
            return Err(HarnessError::Invalid(format!("seed {}: cumulative time decreases", self.seed)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutcome {
    /// Successful runs in configuration seed order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// Pretrained core shared by every seed of a PPOPT experiment.
#[derive(Debug, Clone)]
pub struct SharedCore {
    pub core: ParamStore,
    pub pre_spec: EnvSpec,
    pub sha256: String,
}

/// `PPOPT_THREADS` if set and positive, else `n_seeds`.
pub fn thread_count_from_env(n_seeds: usize) -> usize {
    std::env::var("PPOPT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(n_seeds)
        .max(1)
}

/// Loads the configured parameter file, or pretrains once with `pretrain_seed`.
pub fn prepare_core(config: &ExperimentConfig) -> Result<SharedCore, HarnessError> {
    let pre_kind = config.pre_env.ok_or_else(|| HarnessError::Invalid("algo `ppopt` requires `pre_env`".into()))?;
    let pre_spec = pre_kind.spec();
    let params = match &config.pretrained {
        Some(path) => read_param_file(path).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))?.params,
        None => {
            let mut env = pre_kind.make();
            let mut rng = ChaCha8Rng::seed_from_u64(config.pretrain_seed);
            log::info!("pretraining on {} for {} episodes", pre_kind.as_str(), config.n_pre);
            pretrain(env.as_mut(), &config.ppopt_hyper(), &mut rng).map_err(|e| HarnessError::Run(e.to_string()))?.policy.net.params
        }
    };
    let core = extract_core(&params).map_err(|e| HarnessError::Run(e.to_string()))?;
    let sha256 = params_hash(&core);
    log::info!("core sha256 {sha256}");
    Ok(SharedCore { core, pre_spec, sha256 })
}

/// One fully independent run: own environment, generator and networks.
pub fn run_seed(config: &ExperimentConfig, core: Option<&SharedCore>, seed: u64) -> Result<RunRecord, HarnessError> {
    let mut env: Box<dyn Environment> = config.env.make();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let started = Instant::now();
    let curve = match config.algo {
        Algo::Ppo => train_ppo(env.as_mut(), &config.ppo, config.n_train, &mut rng).map_err(|e| HarnessError::Run(e.to_string()))?.curve,
        Algo::Ppopt => {
            let core = core.ok_or_else(|| HarnessError::Invalid("ppopt run without a pretrained core".into()))?;
            train_from_core(env.as_mut(), &core.pre_spec, &core.core, &config.ppopt_hyper(), &mut rng)
                .map_err(|e| HarnessError::Run(e.to_string()))?
                .curve
        }
        Algo::DynaDdpg => train_dyna_ddpg(env.as_mut(), &config.dyna_config(), &mut rng).map_err(|e| HarnessError::Run(e.to_string()))?.curve,
    };
    log::info!("{} seed {seed}: {} episodes in {:.2} s", config.algo, curve.len(), started.elapsed().as_secs_f64());
    let record = RunRecord::from_curve(config.algo, seed, &curve, config.hash());
    record.validate()?;
    Ok(record)
}

pub fn record_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("runs").join(format!("seed_{seed}.json"))
}

fn persist(dir: &Path, record: &RunRecord) -> Result<(), HarnessError> {
    let path = record_path(dir, record.seed);
    let text = serde_json::to_string(record).expect("record serializes");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

/// Runs every seed with up to `threads` concurrent runs.
///
/// With an output directory, the effective configuration is written first
/// and each record is written as soon as its run finishes. Failed runs are
/// collected and do not stop the others.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    threads: usize,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome, HarnessError> {
    config.validate()?;
    if let Some(dir) = out_dir {
        let runs = dir.join("runs");
        std::fs::create_dir_all(&runs).map_err(|e| HarnessError::io(&runs, e))?;
        let path = dir.join("effective_config.json");
        std::fs::write(&path, config.to_json()).map_err(|e| HarnessError::io(&path, e))?;
    }
    let core = match config.algo {
        Algo::Ppopt => Some(prepare_core(config)?),
        _ => None,
    };

    let seeds = &config.seeds;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord, HarnessError>)>();
    let mut results: Vec<Option<Result<RunRecord, HarnessError>>> = (0..seeds.len()).map(|_| None).collect();
    let mut persist_error = None;
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, seeds.len()) {
            let tx = tx.clone();
            let (next, core) = (&next, core.as_ref());
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let _ = tx.send((i, run_seed(config, core, seeds[i])));
            });
        }
        drop(tx);
        for (i, result) in rx {
            match (&result, out_dir) {
                (Ok(record), Some(dir)) if persist_error.is_none() => persist_error = persist(dir, record).err(),
                (Err(e), _) => log::error!("seed {} failed: {e}", seeds[i]),
                _ => {}
            }
            results[i] = Some(result);
        }
    });
    if let Some(e) = persist_error {
        return Err(e);
    }

    let mut outcome = ExperimentOutcome::default();
    for (seed, result) in seeds.iter().zip(results) {
        match result.expect("every seed reports") {
            Ok(record) => outcome.records.push(record),
            Err(e) => outcome.failures.push(RunFailure { seed: *seed, message: e.to_string() }),
        }
    }
    Ok(outcome)
}

/// [`run_experiment_with`] using `PPOPT_THREADS`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome, HarnessError> {
    run_experiment_with(config, thread_count_from_env(config.seeds.len()), out_dir)
}
