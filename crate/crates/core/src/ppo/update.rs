use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{clip_grad_norm, gaussian_entropy, log_prob_grads, log_prob_unchecked, AdamState, ExtraParam, GaussianPolicy, LayerRates, Mlp};

use super::gae::{compute_gae, normalize};
use super::rollout::Trajectory;
use super::surrogate::{clipped_objective, clipped_surrogate_grad};
use super::PpoError;

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoHyper {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub steps_per_iteration: usize,
    /// Initial rate; decays linearly to zero over the episode budget.
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Hidden widths of the policy network when this loop builds one itself.
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.01,
            epochs: 10,
            minibatch_size: 64,
            steps_per_iteration: 128,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            policy_hidden: vec![64, 64],
            value_hidden: vec![64, 64],
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_epsilon > 0.0) || self.vf_coef < 0.0 || self.ent_coef < 0.0 {
            return bad("clip_epsilon must be positive and coefficients non-negative");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.steps_per_iteration == 0 {
            return bad("epochs, minibatch_size and steps_per_iteration must be positive");
        }
        if self.minibatch_size > self.steps_per_iteration {
            return bad("minibatch_size exceeds steps_per_iteration");
        }
        if !(self.learning_rate >= 0.0) || !(self.max_grad_norm > 0.0) {
            return bad("learning_rate must be non-negative and max_grad_norm positive");
        }
        if self.policy_hidden.contains(&0) || self.value_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Adam state for the policy and the value network.
#[derive(Debug, Clone, Default)]
pub struct PpoOptimizers {
    pub policy: AdamState,
    pub value: AdamState,
}

/// Averages over every minibatch of an update, measured before each gradient step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub policy_objective: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
    pub advantages_normalized: bool,
    /// Multiplier applied to the base learning rates for this update.
    pub lr_factor: f64,
    /// Episodes finished when this update ran.
    pub episodes_consumed: usize,
}

/// Approximate KL `E[(r − 1) − ln r]` and clip fraction of `policy` on `traj`.
pub fn ratio_stats(policy: &GaussianPolicy, traj: &Trajectory, epsilon: f64) -> Result<(f64, f64), PpoError> {
    let mut kl = 0.0;
    let mut clipped = 0usize;
    for t in 0..traj.len() {
        let lp = policy.log_prob(&traj.states[t], &traj.actions[t])?;
        let log_ratio = lp - traj.log_probs[t];
        kl += log_ratio.exp() - 1.0 - log_ratio;
        if (log_ratio.exp() - 1.0).abs() > epsilon {
            clipped += 1;
        }
    }
    let n = traj.len().max(1) as f64;
    Ok((kl / n, clipped as f64 / n))
}

/// Layer-rate map assigning `lr` to every layer of `net` (and `log_std` if `with_log_std`).
pub fn uniform_rates(net: &Mlp, lr: f64, with_log_std: bool) -> LayerRates {
    let mut rates: LayerRates = net.params.layers().iter().map(|l| (l.name.clone(), lr)).collect();
    if with_log_std {
        rates.insert(LOG_STD_KEY.to_string(), lr);
    }
    rates
}

pub const LOG_STD_KEY: &str = "log_std";

/// Scales every rate by `factor`.
pub fn scaled_rates(rates: &LayerRates, factor: f64) -> LayerRates {
    rates.iter().map(|(k, v)| (k.clone(), v * factor)).collect()
}

/// K epochs of shuffled-minibatch descent on `−L_clip + c1·L_vf − c2·H`.
///
/// `policy_rates` must cover every policy layer plus `log_std`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    value_net: &mut Mlp,
    traj: &Trajectory,
    hyper: &PpoHyper,
    opt: &mut PpoOptimizers,
    policy_rates: &LayerRates,
    value_lr: f64,
    rng: &mut R,
) -> Result<UpdateDiagnostics, PpoError> {
    let n = traj.len();
    if n < hyper.minibatch_size {
        return Err(PpoError::BatchTooSmall { collected: n, minibatch: hyper.minibatch_size });
    }
    let batch = compute_gae(
        &traj.rewards,
        &traj.values,
        &traj.terminated,
        &traj.truncated,
        traj.bootstrap_value,
        hyper.gamma,
        hyper.gae_lambda,
    )?;
    let mut advantages = batch.advantages;
    if hyper.normalize_advantages {
        normalize(&mut advantages);
    }
    let returns = batch.returns;
    let value_rates = uniform_rates(value_net, value_lr, false);

    let act_dim = policy.action_dim();
    let mut pg = policy.net.params.zeros_like();
    let mut vg = value_net.params.zeros_like();
    let mut ls_grad = vec![0.0; act_dim];
    let mut d_mean = vec![0.0; act_dim];
    let mut d_ls = vec![0.0; act_dim];
    let mut upstream = vec![0.0; act_dim];
    let mut diag = UpdateDiagnostics { advantages_normalized: hyper.normalize_advantages, ..Default::default() };

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.minibatch_size) {
            pg.fill_zero();
            vg.fill_zero();
            ls_grad.iter_mut().for_each(|g| *g = 0.0);
            let m = chunk.len() as f64;
            let (mut obj_sum, mut vloss_sum, mut kl_sum, mut clip_count) = (0.0, 0.0, 0.0, 0usize);

            for &t in chunk {
                let obs = &traj.states[t];
                let action = &traj.actions[t];
                let cache = policy.net.forward_cached(obs)?;
                let mean = cache.output();
                let lp = log_prob_unchecked(mean, &policy.log_std, action);
                let log_ratio = lp - traj.log_probs[t];
                let ratio = log_ratio.exp();
                let adv = advantages[t];
                obj_sum += clipped_objective(ratio, adv, hyper.clip_epsilon);
                kl_sum += ratio - 1.0 - log_ratio;
                if (ratio - 1.0).abs() > hyper.clip_epsilon {
                    clip_count += 1;
                }
                // d(−objective)/d logp
                let coeff = -clipped_surrogate_grad(ratio, adv, hyper.clip_epsilon) / m;
                if coeff != 0.0 {
                    log_prob_grads(mean, &policy.log_std, action, &mut d_mean, &mut d_ls);
                    for d in 0..act_dim {
                        upstream[d] = coeff * d_mean[d];
                        ls_grad[d] += coeff * d_ls[d];
                    }
                    policy.net.backward_accumulate(&cache, &upstream, &mut pg);
                }

                let vcache = value_net.forward_cached(obs)?;
                let err = vcache.output()[0] - returns[t];
                vloss_sum += err * err;
                let vup = [2.0 * hyper.vf_coef * err / m];
                value_net.backward_accumulate(&vcache, &vup, &mut vg);
            }
            // entropy bonus: ∂H/∂log_std = 1 per dimension
            ls_grad.iter_mut().for_each(|g| *g -= hyper.ent_coef);

            let entropy = gaussian_entropy(&policy.log_std);
            let loss = -obj_sum / m + hyper.vf_coef * vloss_sum / m - hyper.ent_coef * entropy;
            diag.policy_objective += obj_sum / m;
            diag.value_loss += vloss_sum / m;
            diag.entropy += entropy;
            diag.approx_kl += kl_sum / m;
            diag.clip_fraction += clip_count as f64 / m;
            diag.minibatches += 1;
            if !loss.is_finite() {
                return Err(PpoError::NonFiniteLoss(Box::new(finish(diag))));
            }

            let norm = clip_grad_norm(&mut [&mut pg, &mut vg], &mut [&mut ls_grad], hyper.max_grad_norm);
            diag.grad_norm += norm;
            opt.policy.step_with_extra(
                &mut policy.net.params,
                &pg,
                &mut [ExtraParam { name: LOG_STD_KEY, value: &mut policy.log_std, grad: &ls_grad }],
                policy_rates,
            )?;
            opt.value.step(&mut value_net.params, &vg, &value_rates)?;
            policy.clamp_log_std();
        }
    }
    Ok(finish(diag))
}

fn finish(mut d: UpdateDiagnostics) -> UpdateDiagnostics {
    let k = d.minibatches.max(1) as f64;
    d.policy_objective /= k;
    d.value_loss /= k;
    d.entropy /= k;
    d.approx_kl /= k;
    d.clip_fraction /= k;
    d.grad_norm /= k;
    d
}
