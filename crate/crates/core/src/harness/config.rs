use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dyna::DynaConfig;
use crate::envsim::EnvKind;
use crate::ppo::PpoHyper;
use crate::ppopt::PpoptHyper;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ppo,
    Ppopt,
    DynaDdpg,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::Ppopt => "ppopt",
            Algo::DynaDdpg => "dyna_ddpg",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ppo" => Ok(Algo::Ppo),
            "ppopt" => Ok(Algo::Ppopt),
            "dyna_ddpg" => Ok(Algo::DynaDdpg),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_n_pre() -> usize {
    600
}

fn default_n_train() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One experiment: an algorithm, a target environment, seeds and budgets.
///
/// Only `algo` and `env` are required. The hyperparameter sections of the
/// other algorithms are accepted and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub env: EnvKind,
    /// Source task for `ppopt`.
    #[serde(default)]
    pub pre_env: Option<EnvKind>,
    /// Parameter file of a pretrained policy; absent means pretraining inline.
    #[serde(default)]
    pub pretrained: Option<PathBuf>,
    /// Seed of the single inline pretraining run.
    #[serde(default)]
    pub pretrain_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Pretraining episodes.
    #[serde(default = "default_n_pre")]
    pub n_pre: usize,
    /// Training episodes on the target task, for every algorithm.
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default)]
    pub ppo: PpoHyper,
    #[serde(default)]
    pub ppopt: PpoptHyper,
    #[serde(default)]
    pub dyna: DynaConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for everything except the two required fields.
    pub fn new(algo: Algo, env: EnvKind) -> Self {
        Self {
            algo,
            env,
            pre_env: None,
            pretrained: None,
            pretrain_seed: 0,
            seeds: default_seeds(),
            n_pre: default_n_pre(),
            n_train: default_n_train(),
            ppo: PpoHyper::default(),
            ppopt: PpoptHyper::default(),
            dyna: DynaConfig::default(),
            output_dir: default_output_dir(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return bad(format!("seeds must be distinct, got {:?}", self.seeds));
        }
        if self.n_train == 0 {
            return bad("n_train must be at least 1".into());
        }
        match self.algo {
            Algo::Ppo => self.ppo.validate().map_err(|e| HarnessError::Invalid(format!("ppo: {e}"))),
            Algo::Ppopt => {
                if self.pre_env.is_none() {
                    return bad("algo `ppopt` requires `pre_env`".into());
                }
                if self.pretrained.is_none() && self.n_pre == 0 {
                    return bad("inline pretraining requires n_pre of at least 1".into());
                }
                self.ppopt_hyper().validate().map_err(|e| HarnessError::Invalid(format!("ppopt: {e}")))
            }
            Algo::DynaDdpg => self.dyna_config().validate().map_err(|e| HarnessError::Invalid(format!("dyna: {e}"))),
        }
    }

    /// PPOPT settings with this experiment's budgets.
    pub fn ppopt_hyper(&self) -> PpoptHyper {
        PpoptHyper { pretrain_episodes: self.n_pre, train_episodes: self.n_train, ..self.ppopt.clone() }
    }

    /// Dyna-DDPG settings with this experiment's budget.
    pub fn dyna_config(&self) -> DynaConfig {
        DynaConfig { episodes: self.n_train, ..self.dyna.clone() }
    }

    /// Pretty JSON of the effective configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_string(self).expect("config serializes").as_bytes()))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let location = format!(" at line {} column {}", e.line(), e.column());
            let message = full.strip_suffix(&location).unwrap_or(&full).to_string();
            HarnessError::Parse { path: origin.to_path_buf(), line: e.line(), column: e.column(), message }
        })?;
        config.validate()?;
        Ok(config)
    }
}

/// Reads, defaults and validates a JSON experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ExperimentConfig::from_json(&text, path)
}
