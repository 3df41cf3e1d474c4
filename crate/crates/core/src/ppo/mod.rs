//! Proximal policy optimization: rollouts, GAE, the clipped surrogate and
//! episode-budgeted training.

mod gae;
mod rollout;
mod surrogate;
mod train;
mod update;

pub use gae::{compute_gae, normalize, returns_to_go, AdvantageBatch};
pub use rollout::{collect_rollout, EpisodeStat, RolloutCollector, Trajectory};
pub use surrogate::{clipped_objective, clipped_surrogate};
pub use train::{build_policy, build_value, linear_decay, run_ppo_loop, train_ppo, LearningCurve, PpoRun};
pub use update::{ppo_update, ratio_stats, scaled_rates, uniform_rates, PpoHyper, PpoOptimizers, UpdateDiagnostics, LOG_STD_KEY};

use crate::envsim::EnvError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("trajectory has {collected} steps, fewer than minibatch size {minibatch}")]
    BatchTooSmall { collected: usize, minibatch: usize },
    #[error("non-finite loss; diagnostics so far: {0:?}")]
    NonFiniteLoss(Box<UpdateDiagnostics>),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
