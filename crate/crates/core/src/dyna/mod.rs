//! DDPG with a learned dynamics model supplying synthetic transitions.
//!
//! Real and synthetic transitions live in separate buffers so that each
//! update draws its batch from exactly one source.

mod buffer;
mod ddpg;
mod model;
mod train;

pub use buffer::{ReplayBuffer, Source, Transition, DEFAULT_CAPACITY};
pub use ddpg::{ddpg_update, DdpgDiagnostics, DdpgNets};
pub use model::{train_dynamics, DynamicsModel, FitOutcome, TransitionModel};
pub use train::{synthetic_rollouts, train_dyna_ddpg, DynaConfig, DynaRun};

use crate::envsim::EnvError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum DynaError {
    #[error("dynamics model has not been trained")]
    UntrainedModel,
    #[error("update batch is empty")]
    EmptyBatch,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
