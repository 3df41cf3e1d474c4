use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvError, EnvSpec, Environment, EpisodeClock, StepResult};

/// Deterministic linear system `s′ = s + a`, reward `−‖s‖²`, used to validate
/// model learning. States reset uniformly in [−1, 1]; actions lie in [−0.1, 0.1].
#[derive(Debug, Clone)]
pub struct LinearToyEnv {
    state: Vec<f64>,
    clock: EpisodeClock,
    noise: f64,
    max_steps: usize,
}

impl LinearToyEnv {
    pub fn new(dim: usize) -> Self {
        Self { state: vec![0.0; dim], clock: EpisodeClock::default(), noise: 1.0, max_steps: 50 }
    }
}

impl Environment for LinearToyEnv {
    fn name(&self) -> &'static str {
        "linear_toy"
    }

    fn spec(&self) -> EnvSpec {
        let d = self.state.len();
        EnvSpec {
            obs_dim: d,
            action_dim: d,
            action_low: vec![-0.1; d],
            action_high: vec![0.1; d],
            max_episode_steps: self.max_steps,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = self.noise;
        self.state.iter_mut().for_each(|s| *s = if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 });
        self.clock.start();
        self.state.clone()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let a = self.clock.admit(&self.spec(), action)?;
        let reward = -self.state.iter().map(|s| s * s).sum::<f64>();
        self.state.iter_mut().zip(&a).for_each(|(s, a)| *s += a);
        let (terminated, truncated) = self.clock.finish_step(false, self.max_steps);
        Ok(StepResult { observation: self.state.clone(), reward, terminated, truncated })
    }

    fn state(&self) -> Vec<f64> {
        self.state.clone()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError> {
        if state.len() != self.state.len() {
            return Err(EnvError::StateShape { expected: self.state.len(), found: state.len() });
        }
        self.state.copy_from_slice(state);
        self.clock.start();
        Ok(())
    }

    fn set_reset_noise(&mut self, scale: f64) {
        self.noise = scale;
    }
}
