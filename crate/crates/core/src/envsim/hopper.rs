use super::{reset_noise, solve_dense, wrap_angle, EnvError, EnvSpec, Environment, EpisodeClock, StepResult, DEFAULT_RESET_NOISE, DT, SUBSTEPS};

const GRAVITY: f64 = 9.81;
const TORSO_LEN: f64 = 0.4;
const TORSO_MASS: f64 = 3.5;
const THIGH_LEN: f64 = 0.45;
const THIGH_MASS: f64 = 3.0;
const LEG_LEN: f64 = 0.5;
const LEG_MASS: f64 = 2.5;
const TOTAL_MASS: f64 = TORSO_MASS + THIGH_MASS + LEG_MASS;
pub const TORQUE_SCALE: f64 = 30.0;
pub const CONTACT_STIFFNESS: f64 = 2e4;
pub const CONTACT_DAMPING: f64 = 200.0;
const FRICTION: f64 = 1.0;
const MAX_STEPS: usize = 1000;
pub const HEIGHT_FAIL_FRACTION: f64 = 0.7;
pub const TORSO_TILT_LIMIT: f64 = 0.5;

/// Torso COM height when standing at rest with the contact spring at static deflection.
pub const STANDING_HEIGHT: f64 =
    TORSO_LEN / 2.0 + THIGH_LEN + LEG_LEN - TOTAL_MASS * GRAVITY / CONTACT_STIFFNESS;

/// Planar one-legged hopper: torso, thigh and leg rods with a massless foot point.
///
/// Generalized coordinates `(x, z, φ_torso, φ_thigh, φ_leg)` with `(x, z)`
/// the torso centre of mass and all angles absolute from vertical. The state is
/// those five plus their rates. Actions are hip, knee and ankle commands in
/// [−1, 1], scaled to ±30 N·m. The ankle actuator pushes the leg against the
/// ground, so its torque is weighted by how much of the body weight the foot
/// carries. Ground contact is a spring-damper on the foot with Coulomb friction.
#[derive(Debug, Clone)]
pub struct HopperLiteSim {
    state: [f64; 10],
    clock: EpisodeClock,
    noise: f64,
}

impl Default for HopperLiteSim {
    fn default() -> Self {
        Self::new()
    }
}

/// A body point written as `(x, z) + Σ_k s_k·(sin φ_k, cos φ_k)`.
struct Point {
    coef: [f64; 3],
}

const TORSO_COM: Point = Point { coef: [0.0, 0.0, 0.0] };
const THIGH_COM: Point = Point { coef: [-TORSO_LEN / 2.0, -THIGH_LEN / 2.0, 0.0] };
const LEG_COM: Point = Point { coef: [-TORSO_LEN / 2.0, -THIGH_LEN, -LEG_LEN / 2.0] };
const FOOT: Point = Point { coef: [-TORSO_LEN / 2.0, -THIGH_LEN, -LEG_LEN] };

impl Point {
    fn position(&self, q: &[f64]) -> [f64; 2] {
        let mut p = [q[0], q[1]];
        for k in 0..3 {
            let (s, c) = q[2 + k].sin_cos();
            p[0] += self.coef[k] * s;
            p[1] += self.coef[k] * c;
        }
        p
    }

    /// Rows are ∂p_x/∂q and ∂p_z/∂q.
    fn jacobian(&self, q: &[f64]) -> [[f64; 5]; 2] {
        let mut j = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]];
        for k in 0..3 {
            let (s, c) = q[2 + k].sin_cos();
            j[0][2 + k] = self.coef[k] * c;
            j[1][2 + k] = -self.coef[k] * s;
        }
        j
    }

    /// Acceleration from angular rates alone (the `J̇ q̇` term).
    fn velocity_product(&self, q: &[f64], qd: &[f64]) -> [f64; 2] {
        let mut a = [0.0; 2];
        for k in 0..3 {
            let (s, c) = q[2 + k].sin_cos();
            let w2 = qd[2 + k] * qd[2 + k];
            a[0] -= self.coef[k] * w2 * s;
            a[1] -= self.coef[k] * w2 * c;
        }
        a
    }
}

fn dot5(a: &[f64; 5], b: &[f64]) -> f64 {
    (0..5).map(|i| a[i] * b[i]).sum()
}

impl HopperLiteSim {
    pub fn new() -> Self {
        Self { state: Self::standing(), clock: EpisodeClock::default(), noise: DEFAULT_RESET_NOISE }
    }

    pub fn standing() -> [f64; 10] {
        let mut s = [0.0; 10];
        s[1] = STANDING_HEIGHT;
        s
    }

    pub fn torso_height(&self) -> f64 {
        self.state[1]
    }

    pub fn foot_position(&self) -> [f64; 2] {
        FOOT.position(&self.state[..5])
    }

    fn observe(&self) -> Vec<f64> {
        let mut o = self.state.to_vec();
        for k in 2..5 {
            o[k] = wrap_angle(o[k]);
        }
        o
    }

    fn substep(&mut self, torques: [f64; 3], h: f64) {
        let (q, qd) = self.state.split_at(5);
        let bodies = [(&TORSO_COM, TORSO_MASS), (&THIGH_COM, THIGH_MASS), (&LEG_COM, LEG_MASS)];
        let inertia = [
            TORSO_MASS * TORSO_LEN * TORSO_LEN / 12.0,
            THIGH_MASS * THIGH_LEN * THIGH_LEN / 12.0,
            LEG_MASS * LEG_LEN * LEG_LEN / 12.0,
        ];

        let mut mass = [[0.0; 5]; 5];
        let mut gen = [0.0; 5];
        for (point, m) in bodies {
            let j = point.jacobian(q);
            let c = point.velocity_product(q, qd);
            let force = [-m * c[0], -m * GRAVITY - m * c[1]];
            for r in 0..5 {
                for col in 0..5 {
                    mass[r][col] += m * (j[0][r] * j[0][col] + j[1][r] * j[1][col]);
                }
                gen[r] += j[0][r] * force[0] + j[1][r] * force[1];
            }
        }
        for k in 0..3 {
            mass[2 + k][2 + k] += inertia[k];
        }
        let [hip, knee, ankle] = torques;
        gen[2] -= hip;
        gen[3] += hip - knee;
        gen[4] += knee;

        let foot = FOOT.position(q);
        let jf = FOOT.jacobian(q);
        let cf = FOOT.velocity_product(q, qd);
        let foot_vel = [dot5(&jf[0], qd), dot5(&jf[1], qd)];

        let mut normal = 0.0;
        if foot[1] < 0.0 {
            let yz = solve_dense(mass, jf[1]);
            let meff_z = 1.0 / dot5(&jf[1], &yz);
            let cap = meff_z * foot_vel[1].abs() / h;
            let damping = (-CONTACT_DAMPING * foot_vel[1]).clamp(-cap, cap);
            normal = (CONTACT_STIFFNESS * -foot[1] + damping).max(0.0);
            let load = (normal / (TOTAL_MASS * GRAVITY)).min(1.0);
            gen[4] += ankle * load;
            for r in 0..5 {
                gen[r] += jf[1][r] * normal;
            }
        }
        let mut qdd = solve_dense(mass, gen);
        if normal > 0.0 {
            let yx = solve_dense(mass, jf[0]);
            let meff_x = 1.0 / dot5(&jf[0], &yx);
            let accel_x = dot5(&jf[0], &qdd) + cf[0];
            let stop = -meff_x * (foot_vel[0] / h + accel_x);
            let friction = stop.clamp(-FRICTION * normal, FRICTION * normal);
            for r in 0..5 {
                qdd[r] += yx[r] * friction;
            }
        }
        for r in 0..5 {
            self.state[5 + r] += h * qdd[r];
        }
        for r in 0..5 {
            self.state[r] += h * self.state[5 + r];
        }
    }
}

impl Environment for HopperLiteSim {
    fn name(&self) -> &'static str {
        "hopper_lite"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 10,
            action_dim: 3,
            action_low: vec![-1.0; 3],
            action_high: vec![1.0; 3],
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let n = reset_noise(seed, 10, self.noise);
        self.state = Self::standing();
        self.state.iter_mut().zip(&n).for_each(|(s, e)| *s += e);
        self.clock.start();
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let a = self.clock.admit(&self.spec(), action)?;
        let torques = [a[0] * TORQUE_SCALE, a[1] * TORQUE_SCALE, a[2] * TORQUE_SCALE];
        let h = DT / SUBSTEPS as f64;
        for _ in 0..SUBSTEPS {
            self.substep(torques, h);
        }
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::Diverged);
        }
        let ctrl: f64 = a.iter().map(|v| v * v).sum();
        let reward = 1.0 + 1.5 * self.state[5] - 1e-3 * ctrl;
        let failed = self.state[1] < HEIGHT_FAIL_FRACTION * STANDING_HEIGHT || self.state[2].abs() > TORSO_TILT_LIMIT;
        let (terminated, truncated) = self.clock.finish_step(failed, MAX_STEPS);
        Ok(StepResult { observation: self.observe(), reward, terminated, truncated })
    }

    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError> {
        self.state = state
            .try_into()
            .map_err(|_| EnvError::StateShape { expected: 10, found: state.len() })?;
        self.clock.start();
        Ok(())
    }

    fn set_reset_noise(&mut self, scale: f64) {
        self.noise = scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standing_foot_rests_at_static_deflection() {
        let env = HopperLiteSim::new();
        let foot = env.foot_position();
        assert!(foot[0].abs() < 1e-15);
        assert!((foot[1] + TOTAL_MASS * GRAVITY / CONTACT_STIFFNESS).abs() < 1e-12);
    }

    #[test]
    fn exact_stance_holds_with_zero_torque() {
        let mut env = HopperLiteSim::new();
        env.set_reset_noise(0.0);
        env.reset(0);
        for _ in 0..50 {
            let r = env.step(&[0.0; 3]).unwrap();
            assert!(!r.terminated);
        }
        assert!((env.torso_height() - STANDING_HEIGHT).abs() < 1e-6);
    }

    #[test]
    fn free_fall_accelerates_at_gravity() {
        let mut env = HopperLiteSim::new();
        let mut s = HopperLiteSim::standing();
        s[1] += 1.0;
        env.set_state(&s).unwrap();
        env.step(&[0.0; 3]).unwrap();
        let h = DT / SUBSTEPS as f64;
        assert!((env.state()[6] + GRAVITY * DT).abs() < 1e-12);
        // semi-implicit Euler: z drops by g·h²·(1+2)
        assert!((env.state()[1] - (s[1] - GRAVITY * h * h * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn tilted_torso_terminates() {
        let mut env = HopperLiteSim::new();
        let mut s = HopperLiteSim::standing();
        s[2] = 0.6;
        env.set_state(&s).unwrap();
        assert!(env.step(&[0.0; 3]).unwrap().terminated);
    }
}
