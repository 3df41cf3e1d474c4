use super::{reset_noise, solve_dense, wrap_angle, EnvError, EnvSpec, Environment, EpisodeClock, StepResult, DEFAULT_RESET_NOISE, DT, SUBSTEPS};

const GRAVITY: f64 = 9.81;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.05;
const HALF_LENGTH: f64 = 0.3;
const FORCE_LIMIT: f64 = 3.0;
const MAX_STEPS: usize = 1000;
/// Tip height with both poles upright.
pub const MAX_TIP_HEIGHT: f64 = 4.0 * HALF_LENGTH;
pub const TIP_FAIL_FRACTION: f64 = 0.6;

/// Cart with two serial uniform poles. State `(x, ẋ, θ1, θ̇1, θ2, θ̇2)`.
///
/// Both angles are absolute, measured from vertical. Equations of motion come
/// from the Lagrangian of the cart plus two uniform rods (mass 0.05 kg,
/// half-length 0.3 m each).
#[derive(Debug, Clone)]
pub struct DoublePendulumSim {
    state: [f64; 6],
    clock: EpisodeClock,
    noise: f64,
}

impl Default for DoublePendulumSim {
    fn default() -> Self {
        Self::new()
    }
}

impl DoublePendulumSim {
    pub fn new() -> Self {
        Self { state: [0.0; 6], clock: EpisodeClock::default(), noise: DEFAULT_RESET_NOISE }
    }

    pub fn tip_height(&self) -> f64 {
        2.0 * HALF_LENGTH * (self.state[2].cos() + self.state[4].cos())
    }

    fn observe(&self) -> Vec<f64> {
        let [x, xd, a, ad, b, bd] = self.state;
        vec![x, xd, wrap_angle(a), ad, wrap_angle(b), bd]
    }

    /// Generalized accelerations `(ẍ, θ̈1, θ̈2)`.
    fn accelerations(&self, force: f64) -> [f64; 3] {
        let [_, _, a, ad, b, bd] = self.state;
        let (m, l) = (POLE_MASS, HALF_LENGTH);
        let len1 = 2.0 * l;
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let sab = (a - b).sin();
        let cab = (a - b).cos();
        // m1 l1 + m2 L1 with equal rods
        let k1 = m * l + m * len1;
        let mass = [
            [CART_MASS + 2.0 * m, k1 * ca, m * l * cb],
            [k1 * ca, 4.0 / 3.0 * m * l * l + m * len1 * len1, m * len1 * l * cab],
            [m * l * cb, m * len1 * l * cab, 4.0 / 3.0 * m * l * l],
        ];
        let rhs = [
            force + k1 * ad * ad * sa + m * l * bd * bd * sb,
            k1 * GRAVITY * sa - m * len1 * l * bd * bd * sab,
            m * l * GRAVITY * sb + m * len1 * l * ad * ad * sab,
        ];
        solve_dense(mass, rhs)
    }

    fn integrate(&mut self, force: f64) {
        let h = DT / SUBSTEPS as f64;
        for _ in 0..SUBSTEPS {
            let [xa, aa, ba] = self.accelerations(force);
            self.state[1] += h * xa;
            self.state[3] += h * aa;
            self.state[5] += h * ba;
            self.state[0] += h * self.state[1];
            self.state[2] += h * self.state[3];
            self.state[4] += h * self.state[5];
        }
    }
}

impl Environment for DoublePendulumSim {
    fn name(&self) -> &'static str {
        "double_pendulum"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 6,
            action_dim: 1,
            action_low: vec![-FORCE_LIMIT],
            action_high: vec![FORCE_LIMIT],
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let n = reset_noise(seed, 6, self.noise);
        self.state.copy_from_slice(&n);
        self.clock.start();
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let a = self.clock.admit(&self.spec(), action)?;
        self.integrate(a[0]);
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::Diverged);
        }
        let tip = self.tip_height();
        let xd = self.state[1];
        let reward = 10.0 - 5.0 * (MAX_TIP_HEIGHT - tip).powi(2) - 0.01 * xd * xd;
        let failed = tip < TIP_FAIL_FRACTION * MAX_TIP_HEIGHT;
        let (terminated, truncated) = self.clock.finish_step(failed, MAX_STEPS);
        Ok(StepResult { observation: self.observe(), reward, terminated, truncated })
    }

    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError> {
        self.state = state
            .try_into()
            .map_err(|_| EnvError::StateShape { expected: 6, found: state.len() })?;
        self.clock.start();
        Ok(())
    }

    fn set_reset_noise(&mut self, scale: f64) {
        self.noise = scale;
    }
}
