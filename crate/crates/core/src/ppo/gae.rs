use super::PpoError;

/// Per-step advantage estimates and value-regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageBatch {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn check_lengths(n: usize, others: &[(&str, usize)]) -> Result<(), PpoError> {
    for (name, len) in others {
        if *len != n {
            return Err(PpoError::LengthMismatch(format!("{name} has {len} entries, rewards has {n}")));
        }
    }
    Ok(())
}

/// Generalized advantage estimation over one rollout.
///
/// A terminated step contributes no bootstrap. A truncated step in the middle
/// of the rollout also cuts both the TD bootstrap and the λ-recursion, since
/// the following entry belongs to a new episode. The final step bootstraps
/// from `bootstrap_value` unless it terminated.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<AdvantageBatch, PpoError> {
    let n = rewards.len();
    check_lengths(n, &[("values", values.len()), ("terminated", terminated.len()), ("truncated", truncated.len())])?;
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let last = t + 1 == n;
        let next_value = if terminated[t] {
            0.0
        } else if last {
            bootstrap_value
        } else if truncated[t] {
            0.0
        } else {
            values[t + 1]
        };
        let continues = !last && !terminated[t] && !truncated[t];
        let delta = rewards[t] + gamma * next_value - values[t];
        let adv = delta + if continues { gamma * lambda * next_adv } else { 0.0 };
        advantages[t] = adv;
        next_adv = adv;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(AdvantageBatch { advantages, returns })
}

/// Discounted returns `R_t = r_t + γ·R_{t+1}·(1 − terminated_t)`, seeded by `bootstrap_value`.
pub fn returns_to_go(rewards: &[f64], terminated: &[bool], bootstrap_value: f64, gamma: f64) -> Result<Vec<f64>, PpoError> {
    check_lengths(rewards.len(), &[("terminated", terminated.len())])?;
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap_value;
    for t in (0..rewards.len()).rev() {
        let carry = if terminated[t] { 0.0 } else { next };
        out[t] = rewards[t] + gamma * carry;
        next = out[t];
    }
    Ok(out)
}

/// Rescales to zero mean and unit standard deviation (population std, +1e-8).
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / (std + 1e-8));
}
