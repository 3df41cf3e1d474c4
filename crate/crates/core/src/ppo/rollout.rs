use rand::Rng;

use crate::envsim::Environment;
use crate::nn::{GaussianPolicy, Mlp};

use super::PpoError;

/// Transitions from one rollout, stored as parallel per-step arrays.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    /// Value of the state following the last transition; 0 if that transition terminated.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn push(&mut self, state: Vec<f64>, action: Vec<f64>, log_prob: f64, reward: f64, value: f64, terminated: bool, truncated: bool) {
        self.states.push(state);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.terminated.push(terminated);
        self.truncated.push(truncated);
    }
}

/// Undiscounted return and length of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStat {
    pub ret: f64,
    pub len: usize,
}

/// Keeps the environment's episode alive across successive rollouts.
#[derive(Debug, Default)]
pub struct RolloutCollector {
    obs: Option<Vec<f64>>,
    ep_return: f64,
    ep_len: usize,
}

impl RolloutCollector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects up to `n_steps` transitions, stopping early once
    /// `episode_limit` episodes have finished in this call.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        env: &mut dyn Environment,
        policy: &GaussianPolicy,
        value_net: &Mlp,
        n_steps: usize,
        episode_limit: Option<usize>,
        rng: &mut R,
    ) -> Result<(Trajectory, Vec<EpisodeStat>), PpoError> {
        if n_steps == 0 {
            return Err(PpoError::Config("n_steps must be at least 1".into()));
        }
        let mut traj = Trajectory::default();
        let mut episodes = Vec::new();
        let mut last_next_obs: Option<Vec<f64>> = None;
        for _ in 0..n_steps {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => {
                    self.ep_return = 0.0;
                    self.ep_len = 0;
                    env.reset(rng.random())
                }
            };
            let value = value_net.forward(&obs)?[0];
            let (action, log_prob, _) = policy.act(&obs, rng)?;
            let step = env.step(&action)?;
            self.ep_return += step.reward;
            self.ep_len += 1;
            let done = step.done();
            traj.push(obs, action, log_prob, step.reward, value, step.terminated, step.truncated);
            if done {
                episodes.push(EpisodeStat { ret: self.ep_return, len: self.ep_len });
                last_next_obs = if step.terminated { None } else { Some(step.observation) };
                self.obs = None;
                if episode_limit.is_some_and(|limit| episodes.len() >= limit) {
                    break;
                }
            } else {
                last_next_obs = Some(step.observation.clone());
                self.obs = Some(step.observation);
            }
        }
        traj.bootstrap_value = match (traj.terminated.last(), last_next_obs) {
            (Some(false), Some(next)) => value_net.forward(&next)?[0],
            _ => 0.0,
        };
        Ok((traj, episodes))
    }
}

/// Fresh-episode rollout of exactly `n_steps` transitions with automatic resets.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut dyn Environment,
    policy: &GaussianPolicy,
    value_net: &Mlp,
    n_steps: usize,
    rng: &mut R,
) -> Result<Trajectory, PpoError> {
    RolloutCollector::new().collect(env, policy, value_net, n_steps, None, rng).map(|(t, _)| t)
}
