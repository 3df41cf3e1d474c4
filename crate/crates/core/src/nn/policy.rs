use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{clamp_log_std, log_prob_unchecked, sample_action};
use super::mlp::Mlp;
use super::NnError;

/// Diagonal Gaussian policy: the network gives the mean, `log_std` is a
/// state-independent learnable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(net: Mlp) -> Self {
        let d = net.output_dim();
        Self { net, log_std: vec![0.0; d] }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>, NnError> {
        self.net.forward(obs)
    }

    /// Samples an action; returns `(action, log_prob, mean)`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64, Vec<f64>), NnError> {
        let mean = self.mean(obs)?;
        let (action, lp) = sample_action(&mean, &self.log_std, rng);
        Ok((action, lp, mean))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64, NnError> {
        let mean = self.mean(obs)?;
        if action.len() != mean.len() {
            return Err(NnError::Shape(format!("action {} vs {}", action.len(), mean.len())));
        }
        Ok(log_prob_unchecked(&mean, &self.log_std, action))
    }

    pub fn clamp_log_std(&mut self) {
        clamp_log_std(&mut self.log_std);
    }

    pub fn num_params(&self) -> usize {
        self.net.params.num_params() + self.log_std.len()
    }
}
