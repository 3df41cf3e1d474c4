use rand::Rng;

use crate::envsim::EnvSpec;
use crate::nn::{Activation, AdamState, LayerRates, Mlp, MlpSpec, ParamStore};

use super::buffer::Transition;
use super::DynaError;

/// Gain of the final actor and critic layers at initialization.
const HEAD_GAIN: f64 = 0.01;

/// Deterministic actor, Q critic, and their Polyak-averaged targets.
#[derive(Debug, Clone)]
pub struct DdpgNets {
    /// Tanh-squashed output in [−1, 1] per action dimension.
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    action_mid: Vec<f64>,
    action_half: Vec<f64>,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgDiagnostics {
    /// Critic MSE against the bootstrapped targets, before the step.
    pub critic_loss: f64,
    /// Mean `Q(s, μ(s))` after the critic step, before the actor step.
    pub actor_objective: f64,
}

fn net_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}

fn all_rates(net: &Mlp, lr: f64) -> LayerRates {
    net.params.layers().iter().map(|l| (l.name.clone(), lr)).collect()
}

impl DdpgNets {
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, actor_hidden: &[usize], critic_hidden: &[usize], rng: &mut R) -> Self {
        let actor_spec = MlpSpec::new(net_dims(spec.obs_dim, actor_hidden, spec.action_dim))
            .expect("positive dims")
            .with_output_activation(Activation::Tanh);
        let actor = Mlp::init(actor_spec, "actor.", HEAD_GAIN, rng);
        let critic_spec = MlpSpec::new(net_dims(spec.obs_dim + spec.action_dim, critic_hidden, 1)).expect("positive dims");
        let critic = Mlp::init(critic_spec, "critic.", HEAD_GAIN, rng);
        let action_mid = spec.action_low.iter().zip(&spec.action_high).map(|(l, h)| 0.5 * (l + h)).collect();
        let action_half = spec.action_low.iter().zip(&spec.action_high).map(|(l, h)| 0.5 * (h - l)).collect();
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            action_mid,
            action_half,
            actor_opt: AdamState::default(),
            critic_opt: AdamState::default(),
        }
    }

    fn scale(&self, squashed: &[f64]) -> Vec<f64> {
        squashed.iter().zip(self.action_mid.iter().zip(&self.action_half)).map(|(u, (m, h))| m + h * u).collect()
    }

    /// Greedy action in environment units.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>, DynaError> {
        Ok(self.scale(&self.actor.forward(obs)?))
    }

    fn target_act(&self, obs: &[f64]) -> Result<Vec<f64>, DynaError> {
        Ok(self.scale(&self.actor_target.forward(obs)?))
    }

    pub fn q_value(&self, obs: &[f64], action: &[f64]) -> Result<f64, DynaError> {
        Ok(self.critic.forward(&concat(obs, action))?[0])
    }

    /// Both targets move toward the online nets by `tau`.
    pub fn soft_update(&mut self, tau: f64) {
        self.actor_target.params.soft_update_from(&self.actor.params, tau);
        self.critic_target.params.soft_update_from(&self.critic.params, tau);
    }

    /// `‖θ_target − θ_online‖` over both networks.
    pub fn target_distance(&self) -> f64 {
        let a = self.actor_target.params.distance(&self.actor.params);
        let c = self.critic_target.params.distance(&self.critic.params);
        (a * a + c * c).sqrt()
    }

    pub fn actor_params(&self) -> &ParamStore {
        &self.actor.params
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

fn ensure_finite(store: &ParamStore, what: &str, loss: f64) -> Result<(), DynaError> {
    if !loss.is_finite() || !store.values().all(|g| g.is_finite()) {
        return Err(DynaError::NonFinite(format!("{what} (loss {loss})")));
    }
    Ok(())
}

/// One critic step, one actor step, then a soft update of both targets.
///
/// The critic regresses toward `r + γ·(1 − terminated)·Q′(s′, μ′(s′))`; the
/// actor ascends `Q(s, μ(s))` through the updated critic.
pub fn ddpg_update(
    nets: &mut DdpgNets,
    batch: &[&Transition],
    gamma: f64,
    tau: f64,
    actor_lr: f64,
    critic_lr: f64,
) -> Result<DdpgDiagnostics, DynaError> {
    if batch.is_empty() {
        return Err(DynaError::EmptyBatch);
    }
    let n = batch.len() as f64;

    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let bootstrap = if t.terminated {
            0.0
        } else {
            let a = nets.target_act(&t.next_state)?;
            nets.critic_target.forward(&concat(&t.next_state, &a))?[0]
        };
        targets.push(t.reward + gamma * bootstrap);
    }

    let mut critic_grads = nets.critic.params.zeros_like();
    let mut critic_loss = 0.0;
    for (t, y) in batch.iter().zip(&targets) {
        let cache = nets.critic.forward_cached(&concat(&t.state, &t.action))?;
        let err = cache.output()[0] - y;
        critic_loss += err * err / n;
        nets.critic.backward_accumulate(&cache, &[2.0 * err / n], &mut critic_grads);
    }
    ensure_finite(&critic_grads, "critic gradient", critic_loss)?;
    let rates = all_rates(&nets.critic, critic_lr);
    nets.critic_opt.step(&mut nets.critic.params, &critic_grads, &rates)?;

    let mut actor_grads = nets.actor.params.zeros_like();
    let mut sink = nets.critic.params.zeros_like();
    let mut objective = 0.0;
    let obs_dim = nets.actor.input_dim();
    for t in batch {
        let actor_cache = nets.actor.forward_cached(&t.state)?;
        let action = nets.scale(actor_cache.output());
        let critic_cache = nets.critic.forward_cached(&concat(&t.state, &action))?;
        objective += critic_cache.output()[0] / n;
        let dx = nets.critic.backward_accumulate(&critic_cache, &[-1.0 / n], &mut sink);
        let upstream: Vec<f64> = dx[obs_dim..].iter().zip(&nets.action_half).map(|(g, h)| g * h).collect();
        nets.actor.backward_accumulate(&actor_cache, &upstream, &mut actor_grads);
    }
    ensure_finite(&actor_grads, "actor gradient", objective)?;
    let rates = all_rates(&nets.actor, actor_lr);
    nets.actor_opt.step(&mut nets.actor.params, &actor_grads, &rates)?;

    nets.soft_update(tau);
    Ok(DdpgDiagnostics { critic_loss, actor_objective: objective })
}
