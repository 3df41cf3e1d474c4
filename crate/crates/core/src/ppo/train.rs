use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envsim::Environment;
use crate::nn::{GaussianPolicy, LayerRates, Mlp, MlpSpec};

use super::rollout::RolloutCollector;
use super::update::{ppo_update, scaled_rates, uniform_rates, PpoHyper, PpoOptimizers, UpdateDiagnostics};
use super::PpoError;

/// Per-episode undiscounted returns in completion order, with episode lengths
/// and wall-clock time since training started.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub returns: Vec<f64>,
    pub lengths: Vec<usize>,
    pub cum_time_ms: Vec<f64>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn push(&mut self, ret: f64, len: usize, started: Instant) {
        self.returns.push(ret);
        self.lengths.push(len);
        self.cum_time_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }

    /// Mean return over the last `n` episodes (or all, if fewer).
    pub fn tail_mean(&self, n: usize) -> f64 {
        let k = n.min(self.returns.len()).max(1);
        self.returns[self.returns.len().saturating_sub(k)..].iter().sum::<f64>() / k as f64
    }

    pub fn total_steps(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Learning-rate multiplier after `consumed` of `total` episodes.
pub fn linear_decay(consumed: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (1.0 - consumed as f64 / total as f64).max(0.0)
}

pub fn build_policy<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], prefix: &str, rng: &mut R) -> GaussianPolicy {
    let mut dims = vec![obs_dim];
    dims.extend_from_slice(hidden);
    dims.push(act_dim);
    let spec = MlpSpec::new(dims).expect("positive dims");
    GaussianPolicy::new(Mlp::init(spec, prefix, 0.01, rng))
}

pub fn build_value<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Mlp {
    let mut dims = vec![obs_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    Mlp::init(MlpSpec::new(dims).expect("positive dims"), "vf.", 1.0, rng)
}

/// Outcome of an episode-budgeted PPO loop.
#[derive(Debug, Clone)]
pub struct PpoRun {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub curve: LearningCurve,
    pub updates: Vec<UpdateDiagnostics>,
}

/// Alternates rollouts and updates until `total_episodes` episodes have finished.
///
/// Rates in `base_rates` (policy layers plus `log_std`) and `value_lr` all
/// decay linearly with the number of finished episodes.
#[allow(clippy::too_many_arguments)]
pub fn run_ppo_loop<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    policy: &mut GaussianPolicy,
    value_net: &mut Mlp,
    hyper: &PpoHyper,
    base_rates: &LayerRates,
    value_lr: f64,
    total_episodes: usize,
    rng: &mut R,
) -> Result<(LearningCurve, Vec<UpdateDiagnostics>), PpoError> {
    hyper.validate()?;
    if total_episodes == 0 {
        return Err(PpoError::Config("episode budget must be at least 1".into()));
    }
    let started = Instant::now();
    let mut curve = LearningCurve::default();
    let mut updates = Vec::new();
    let mut opt = PpoOptimizers::default();
    let mut collector = RolloutCollector::new();
    while curve.len() < total_episodes {
        let remaining = total_episodes - curve.len();
        let (traj, episodes) =
            collector.collect(env, policy, value_net, hyper.steps_per_iteration, Some(remaining), rng)?;
        for ep in &episodes {
            curve.push(ep.ret, ep.len, started);
        }
        // Once the budget is spent nothing downstream observes another update.
        if curve.len() >= total_episodes || traj.len() < hyper.minibatch_size {
            continue;
        }
        let factor = linear_decay(curve.len(), total_episodes);
        let rates = scaled_rates(base_rates, factor);
        let mut diag = ppo_update(policy, value_net, &traj, hyper, &mut opt, &rates, value_lr * factor, rng)?;
        diag.lr_factor = factor;
        diag.episodes_consumed = curve.len();
        updates.push(diag);
    }
    Ok((curve, updates))
}

/// Baseline PPO: fresh policy and value networks trained for `total_episodes`.
pub fn train_ppo<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    hyper: &PpoHyper,
    total_episodes: usize,
    rng: &mut R,
) -> Result<PpoRun, PpoError> {
    hyper.validate()?;
    let spec = env.spec();
    let mut policy = build_policy(spec.obs_dim, spec.action_dim, &hyper.policy_hidden, "pi.", rng);
    let mut value = build_value(spec.obs_dim, &hyper.value_hidden, rng);
    let rates = uniform_rates(&policy.net, hyper.learning_rate, true);
    let (curve, updates) =
        run_ppo_loop(env, &mut policy, &mut value, hyper, &rates, hyper.learning_rate, total_episodes, rng)?;
    Ok(PpoRun { policy, value, curve, updates })
}
