use serde::{Deserialize, Serialize};

use super::config::Algo;
use super::run::RunRecord;
use super::HarnessError;

/// Pointwise statistics over the seeds of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub algo: Algo,
    pub n_runs: usize,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean_total_seconds: f64,
}

impl AggregateCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Mean of `mean` over the last `n` episodes.
    pub fn tail_mean(&self, n: usize) -> f64 {
        tail(&self.mean, n).iter().sum::<f64>() / tail(&self.mean, n).len().max(1) as f64
    }

    /// Mean of `max − min` over the last `n` episodes.
    pub fn tail_band_width(&self, n: usize) -> f64 {
        let (lo, hi) = (tail(&self.min, n), tail(&self.max, n));
        lo.iter().zip(hi).map(|(l, h)| h - l).sum::<f64>() / lo.len().max(1) as f64
    }
}

fn tail(v: &[f64], n: usize) -> &[f64] {
    &v[v.len().saturating_sub(n)..]
}

/// Pointwise mean, min and max. Curves of unequal length are truncated to
/// the shortest, with a warning.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateCurve, HarnessError> {
    let first = records.first().ok_or(HarnessError::NoRecords)?;
    if let Some(other) = records.iter().find(|r| r.algo != first.algo) {
        return Err(HarnessError::Invalid(format!("mixed algorithms {} and {}", first.algo, other.algo)));
    }
    let len = records.iter().map(|r| r.returns.len()).min().unwrap_or(0);
    if records.iter().any(|r| r.returns.len() != len) {
        log::warn!("curves of {} differ in length; truncating to {len} episodes", first.algo);
    }
    let n = records.len() as f64;
    let mut mean = vec![0.0; len];
    let mut min = vec![f64::INFINITY; len];
    let mut max = vec![f64::NEG_INFINITY; len];
    for r in records {
        for (i, v) in r.returns[..len].iter().enumerate() {
            mean[i] += v;
            min[i] = min[i].min(*v);
            max[i] = max[i].max(*v);
        }
    }
    // Summing before dividing can leave the mean an ulp outside [min, max].
    for ((m, lo), hi) in mean.iter_mut().zip(&min).zip(&max) {
        *m = (*m / n).clamp(*lo, *hi);
    }
    let mean_total_seconds = records.iter().map(|r| r.total_ms / 1e3).sum::<f64>() / n;
    Ok(AggregateCurve { algo: first.algo, n_runs: records.len(), mean, min, max, mean_total_seconds })
}

/// Copy of `values` with everything below `floor` raised to it. A floor of
/// `f64::NEG_INFINITY` disables clipping.
pub fn clip_rewards_for_plot(values: &[f64], floor: f64) -> Vec<f64> {
    values.iter().map(|v| if *v < floor { floor } else { *v }).collect()
}
