use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envsim::{EnvSpec, Environment};
use crate::ppo::LearningCurve;

use super::buffer::{ReplayBuffer, Source, DEFAULT_CAPACITY};
use super::ddpg::{ddpg_update, DdpgNets};
use super::model::{train_dynamics, DynamicsModel, FitOutcome, TransitionModel};
use super::DynaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynaConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub model_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Exploration noise standard deviation as a fraction of each action range.
    pub exploration_noise: f64,
    /// Environment steps between model refits.
    pub model_every: usize,
    /// Synthetic-batch updates after each refit.
    pub synthetic_updates: usize,
    pub rollout_depth: usize,
    pub rollout_starts: usize,
    /// Most recent real transitions used per refit; `None` uses all.
    pub model_window: Option<usize>,
    pub model_epochs: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub model_hidden: Vec<usize>,
    /// `false` skips the model entirely, leaving plain DDPG.
    pub synthetic: bool,
    /// Set from the experiment budget; not part of the serialized form.
    #[serde(skip)]
    pub episodes: usize,
}

impl Default for DynaConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            model_lr: 1e-3,
            batch_size: 64,
            buffer_capacity: DEFAULT_CAPACITY,
            exploration_noise: 0.1,
            model_every: 10,
            synthetic_updates: 4,
            rollout_depth: 1,
            rollout_starts: 256,
            model_window: Some(512),
            model_epochs: 1,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            model_hidden: vec![200, 200],
            synthetic: true,
            episodes: 200,
        }
    }
}

impl DynaConfig {
    pub fn validate(&self) -> Result<(), DynaError> {
        let bad = |m: &str| Err(DynaError::Config(m.into()));
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return bad("gamma and tau must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.model_every == 0 {
            return bad("batch_size, buffer_capacity and model_every must be positive");
        }
        if [self.actor_lr, self.critic_lr, self.model_lr, self.exploration_noise].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("learning rates and exploration noise must be finite and non-negative");
        }
        if [&self.actor_hidden, &self.critic_hidden, &self.model_hidden].iter().any(|h| h.contains(&0)) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

fn noisy_action<R: Rng + ?Sized>(nets: &DdpgNets, spec: &EnvSpec, obs: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>, DynaError> {
    let mut a = nets.act(obs)?;
    if sigma > 0.0 {
        for (v, range) in a.iter_mut().zip(spec.action_range()) {
            *v += Normal::new(0.0, sigma * range).expect("positive std").sample(rng);
        }
    }
    Ok(spec.clip_action(&a))
}

/// Appends `n_starts × k_depth` model-predicted transitions to `synthetic`.
///
/// Starts are real states drawn uniformly from `real`; actions are the
/// clipped noisy policy output. Predicted transitions never terminate.
/// Returns the number appended.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_rollouts<M: TransitionModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    nets: &DdpgNets,
    spec: &EnvSpec,
    real: &ReplayBuffer,
    synthetic: &mut ReplayBuffer,
    k_depth: usize,
    n_starts: usize,
    noise: f64,
    rng: &mut R,
) -> Result<usize, DynaError> {
    if !model.is_trained() {
        return Err(DynaError::UntrainedModel);
    }
    if k_depth == 0 || real.is_empty() {
        return Ok(0);
    }
    let starts: Vec<Vec<f64>> = real.sample(n_starts, rng).into_iter().map(|t| t.state.clone()).collect();
    let mut added = 0;
    for mut state in starts {
        for _ in 0..k_depth {
            let action = noisy_action(nets, spec, &state, noise, rng)?;
            let (next, reward) = model.predict(&state, &action)?;
            if !reward.is_finite() || next.iter().any(|v| !v.is_finite()) {
                return Err(DynaError::NonFinite("model prediction".into()));
            }
            synthetic.push(state, action, reward, next.clone(), false, Source::Synthetic);
            added += 1;
            state = next;
        }
    }
    Ok(added)
}

#[derive(Debug, Clone)]
pub struct DynaRun {
    pub nets: DdpgNets,
    pub model: DynamicsModel,
    pub curve: LearningCurve,
    pub real_updates: usize,
    pub synthetic_updates: usize,
    /// Refits that produced a synthetic round.
    pub synthetic_rounds: usize,
    pub model_fits: usize,
    pub synthetic_transitions: usize,
}

/// Dyna-style DDPG for `config.episodes` episodes.
///
/// Every step stores the real transition and, once `batch_size` real
/// transitions exist, performs one real-batch update. Every `model_every`
/// steps the model is refit and, if that fit succeeded, synthetic rollouts
/// are generated and followed by `synthetic_updates` synthetic-batch updates.
pub fn train_dyna_ddpg<R: Rng + ?Sized>(env: &mut dyn Environment, config: &DynaConfig, rng: &mut R) -> Result<DynaRun, DynaError> {
    config.validate()?;
    let spec = env.spec();
    let mut nets = DdpgNets::new(&spec, &config.actor_hidden, &config.critic_hidden, rng);
    let mut model = DynamicsModel::new(spec.obs_dim, spec.action_dim, &config.model_hidden, rng);
    let mut real = ReplayBuffer::new(config.buffer_capacity);
    let mut synthetic = ReplayBuffer::new(config.buffer_capacity);
    let (mut real_updates, mut synthetic_updates, mut synthetic_rounds) = (0, 0, 0);
    let (mut model_fits, mut synthetic_transitions) = (0, 0);
    let mut curve = LearningCurve::default();
    let started = Instant::now();
    let mut total_steps = 0usize;

    for _ in 0..config.episodes {
        let mut obs = env.reset(rng.random());
        let (mut ret, mut len) = (0.0, 0usize);
        loop {
            let action = noisy_action(&nets, &spec, &obs, config.exploration_noise, rng)?;
            let step = env.step(&action)?;
            ret += step.reward;
            len += 1;
            total_steps += 1;
            real.push(obs, action, step.reward, step.observation.clone(), step.terminated, Source::Real);

            if real.len() >= config.batch_size {
                let batch = real.sample(config.batch_size, rng);
                ddpg_update(&mut nets, &batch, config.gamma, config.tau, config.actor_lr, config.critic_lr)?;
                real_updates += 1;
            }

            if config.synthetic && total_steps % config.model_every == 0 {
                let fit = train_dynamics(&mut model, &real, config.model_window, config.model_epochs, config.model_lr, config.batch_size, rng)?;
                if let FitOutcome::Fitted { .. } = fit {
                    model_fits += 1;
                    synthetic_transitions += synthetic_rollouts(
                        &model,
                        &nets,
                        &spec,
                        &real,
                        &mut synthetic,
                        config.rollout_depth,
                        config.rollout_starts,
                        config.exploration_noise,
                        rng,
                    )?;
                    if !synthetic.is_empty() {
                        synthetic_rounds += 1;
                        for _ in 0..config.synthetic_updates {
                            let batch = synthetic.sample(config.batch_size, rng);
                            ddpg_update(&mut nets, &batch, config.gamma, config.tau, config.actor_lr, config.critic_lr)?;
                            synthetic_updates += 1;
                        }
                    }
                }
            }

            if step.done() {
                break;
            }
            obs = step.observation;
        }
        curve.push(ret, len, started);
    }

    Ok(DynaRun { nets, model, curve, real_updates, synthetic_updates, synthetic_rounds, model_fits, synthetic_transitions })
}
