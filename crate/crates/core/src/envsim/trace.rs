use std::io::Write;

use super::{EnvError, EnvSpec, Environment, StepResult};

/// Debug wrapper writing one CSV row per step: `step,s0..,a0..,reward`.
///
/// The state columns hold the raw simulator state after the step.
pub struct TracedEnv<E, W> {
    inner: E,
    out: W,
    step: usize,
    header_written: bool,
}

impl<E: Environment, W: Write + Send> TracedEnv<E, W> {
    pub fn new(inner: E, out: W) -> Self {
        Self { inner, out, step: 0, header_written: false }
    }

    pub fn into_inner(self) -> (E, W) {
        (self.inner, self.out)
    }

    fn write_header(&mut self) -> std::io::Result<()> {
        let spec = self.inner.spec();
        let mut cols = vec!["step".to_string()];
        cols.extend((0..self.inner.state().len()).map(|i| format!("s{i}")));
        cols.extend((0..spec.action_dim).map(|i| format!("a{i}")));
        cols.push("reward".into());
        writeln!(self.out, "{}", cols.join(","))
    }
}

impl<E: Environment, W: Write + Send> Environment for TracedEnv<E, W> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.step = 0;
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let r = self.inner.step(action)?;
        if !self.header_written {
            // I/O errors are ignored; tracing never fails a step.
            let _ = self.write_header();
            self.header_written = true;
        }
        let mut row = vec![self.step.to_string()];
        row.extend(self.inner.state().iter().map(|v| format!("{v:.17e}")));
        row.extend(action.iter().map(|v| format!("{v:.17e}")));
        row.push(format!("{:.17e}", r.reward));
        let _ = writeln!(self.out, "{}", row.join(","));
        self.step += 1;
        Ok(r)
    }

    fn state(&self) -> Vec<f64> {
        self.inner.state()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<(), EnvError> {
        self.inner.set_state(state)
    }

    fn set_reset_noise(&mut self, scale: f64) {
        self.inner.set_reset_noise(scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::InvertedPendulumSim;

    #[test]
    fn writes_header_and_rows() {
        let mut env = TracedEnv::new(InvertedPendulumSim::new(), Vec::new());
        env.reset(1);
        env.step(&[0.5]).unwrap();
        env.step(&[-0.5]).unwrap();
        let (_, buf) = env.into_inner();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,s0,s1,s2,s3,a0,reward");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,"));
    }
}
