//! Seedable planar physics environments behind one [`Environment`] trait.
//!
//! All simulators advance one control step as two semi-implicit Euler
//! substeps of 0.01 s. Observations are the raw state with angles wrapped to
//! (−π, π].

mod double_pendulum;
mod hopper;
mod pendulum;
mod toy;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use double_pendulum::DoublePendulumSim;
pub use hopper::{HopperLiteSim, HEIGHT_FAIL_FRACTION, STANDING_HEIGHT, TORSO_TILT_LIMIT};
pub use pendulum::InvertedPendulumSim;
pub use toy::LinearToyEnv;
pub use trace::TracedEnv;

/// Control period in seconds.
pub const DT: f64 = 0.02;
pub const SUBSTEPS: usize = 2;
pub const DEFAULT_RESET_NOISE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn action_range(&self) -> Vec<f64> {
        self.action_high.iter().zip(&self.action_low).map(|(h, l)| h - l).collect()
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Failure condition reached (fall, tip drop, ...).
    pub terminated: bool,
    /// Step limit reached without failure.
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("step called on a finished episode; call reset first")]
    EpisodeFinished,
    #[error("action has length {found}, expected {expected}")]
    ActionShape { expected: usize, found: usize },
    #[error("action contains a non-finite value")]
    NonFiniteAction,
    #[error("state has length {found}, expected {expected}")]
    StateShape { expected: usize, found: usize },
    #[error("simulation diverged")]
    Diverged,
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;

    fn spec(&self) -> EnvSpec;

    /// Starts a new episode from the nominal state plus seeded uniform noise.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    /// Raw (unwrapped) simulator state.
    fn state(&self) -> Vec<f64>;

    /// Test hook: places the simulator in `state` and starts a fresh episode there.
    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError>;

    /// Half-width of the uniform reset noise; 0 gives the exact nominal state.
    fn set_reset_noise(&mut self, scale: f64);
}

pub fn env_spec(env: &dyn Environment) -> EnvSpec {
    env.spec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    InvertedPendulum,
    DoublePendulum,
    HopperLite,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::InvertedPendulum => Box::new(InvertedPendulumSim::new()),
            EnvKind::DoublePendulum => Box::new(DoublePendulumSim::new()),
            EnvKind::HopperLite => Box::new(HopperLiteSim::new()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        self.make().spec()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::InvertedPendulum => "inverted_pendulum",
            EnvKind::DoublePendulum => "double_pendulum",
            EnvKind::HopperLite => "hopper_lite",
        }
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = a - 2.0 * PI * ((a - PI) / (2.0 * PI)).ceil();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub(crate) fn reset_noise(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 })
        .collect()
}

/// Step counter and episode status shared by all simulators.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub steps: usize,
    pub active: bool,
}

impl EpisodeClock {
    pub fn start(&mut self) {
        self.steps = 0;
        self.active = true;
    }

    /// Validates an incoming action and returns it clipped into bounds.
    pub fn admit(&self, spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>, EnvError> {
        if !self.active {
            return Err(EnvError::EpisodeFinished);
        }
        if action.len() != spec.action_dim {
            return Err(EnvError::ActionShape { expected: spec.action_dim, found: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction);
        }
        Ok(spec.clip_action(action))
    }

    /// Advances the counter and returns `(terminated, truncated)`.
    pub fn finish_step(&mut self, failed: bool, max_steps: usize) -> (bool, bool) {
        self.steps += 1;
        let truncated = !failed && self.steps >= max_steps;
        if failed || truncated {
            self.active = false;
        }
        (failed, truncated)
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> [f64; N] {
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}
