use super::{reset_noise, wrap_angle, EnvError, EnvSpec, Environment, EpisodeClock, StepResult, DEFAULT_RESET_NOISE, DT, SUBSTEPS};

const GRAVITY: f64 = 9.81;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const HALF_LENGTH: f64 = 0.5;
const FORCE_LIMIT: f64 = 3.0;
pub const THETA_LIMIT: f64 = 0.2;
pub const X_LIMIT: f64 = 2.4;
const MAX_STEPS: usize = 1000;

/// Cart-pole with a continuous force input. State `(x, ẋ, θ, θ̇)`, θ = 0 upright.
///
/// Reward is 1 for every step taken; the episode terminates once
/// |θ| > 0.2 rad or |x| > 2.4 m.
#[derive(Debug, Clone)]
pub struct InvertedPendulumSim {
    state: [f64; 4],
    clock: EpisodeClock,
    noise: f64,
}

impl Default for InvertedPendulumSim {
    fn default() -> Self {
        Self::new()
    }
}

impl InvertedPendulumSim {
    pub fn new() -> Self {
        Self { state: [0.0; 4], clock: EpisodeClock::default(), noise: DEFAULT_RESET_NOISE }
    }

    fn observe(&self) -> Vec<f64> {
        let [x, xd, th, thd] = self.state;
        vec![x, xd, wrap_angle(th), thd]
    }

    fn integrate(&mut self, force: f64) {
        let h = DT / SUBSTEPS as f64;
        let total = CART_MASS + POLE_MASS;
        let pml = POLE_MASS * HALF_LENGTH;
        for _ in 0..SUBSTEPS {
            let [_, _, th, thd] = self.state;
            let (s, c) = th.sin_cos();
            let temp = (force + pml * thd * thd * s) / total;
            let th_acc = (GRAVITY * s - c * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * c * c / total));
            let x_acc = temp - pml * th_acc * c / total;
            self.state[1] += h * x_acc;
            self.state[0] += h * self.state[1];
            self.state[3] += h * th_acc;
            self.state[2] += h * self.state[3];
        }
    }
}

impl Environment for InvertedPendulumSim {
    fn name(&self) -> &'static str {
        "inverted_pendulum"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 4,
            action_dim: 1,
            action_low: vec![-FORCE_LIMIT],
            action_high: vec![FORCE_LIMIT],
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let n = reset_noise(seed, 4, self.noise);
        self.state = [n[0], n[1], n[2], n[3]];
        self.clock.start();
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let a = self.clock.admit(&self.spec(), action)?;
        self.integrate(a[0]);
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::Diverged);
        }
        let failed = self.state[2].abs() > THETA_LIMIT || self.state[0].abs() > X_LIMIT;
        let (terminated, truncated) = self.clock.finish_step(failed, MAX_STEPS);
        Ok(StepResult { observation: self.observe(), reward: 1.0, terminated, truncated })
    }

    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError> {
        self.state = state
            .try_into()
            .map_err(|_| EnvError::StateShape { expected: 4, found: state.len() })?;
        self.clock.start();
        Ok(())
    }

    fn set_reset_noise(&mut self, scale: f64) {
        self.noise = scale;
    }
}
