use rand::seq::SliceRandom;
use rand::Rng;

use crate::nn::{AdamState, LayerRates, Mlp, MlpSpec};

use super::buffer::{ReplayBuffer, Source, Transition};
use super::DynaError;

/// One-step predictor `(s, a) ↦ (s′, r)`.
pub trait TransitionModel {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn is_trained(&self) -> bool;
    fn predict(&self, state: &[f64], action: &[f64]) -> Result<(Vec<f64>, f64), DynaError>;
}

/// Per-dimension affine standardization.
#[derive(Debug, Clone, PartialEq)]
struct Scaler {
    mean: Vec<f64>,
    std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-3;

impl Scaler {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; dim];
        for r in &rows {
            var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / n);
        }
        Self { mean, std: var.into_iter().map(|v| v.sqrt().max(STD_FLOOR)).collect() }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }
}

/// MLP predicting `(Δs, r)` from `(s, a)`, with input and target
/// standardization fixed at the first fit.
#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub net: Mlp,
    obs_dim: usize,
    action_dim: usize,
    input_scale: Option<Scaler>,
    target_scale: Option<Scaler>,
    opt: AdamState,
}

/// Result of one training call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitOutcome {
    Fitted { train_mse: f64, validation_mse: f64 },
    /// Too few transitions; the model is unchanged.
    Skipped { available: usize, required: usize },
}

fn input_of(t: &Transition) -> Vec<f64> {
    let mut x = t.state.clone();
    x.extend_from_slice(&t.action);
    x
}

fn target_of(t: &Transition) -> Vec<f64> {
    let mut y: Vec<f64> = t.next_state.iter().zip(&t.state).map(|(n, s)| n - s).collect();
    y.push(t.reward);
    y
}

impl DynamicsModel {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![obs_dim + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(obs_dim + 1);
        let net = Mlp::init(MlpSpec::new(dims).expect("positive dims"), "model.", 1.0, rng);
        Self { net, obs_dim, action_dim, input_scale: None, target_scale: None, opt: AdamState::default() }
    }

    /// Predicted `(Δs, r)` in original units.
    pub fn predict_delta(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>, DynaError> {
        let (Some(xs), Some(ys)) = (&self.input_scale, &self.target_scale) else {
            return Err(DynaError::UntrainedModel);
        };
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        let z = self.net.forward(&xs.apply(&x))?;
        Ok(ys.invert(&z))
    }

    fn mse(&self, data: &[&Transition]) -> Result<f64, DynaError> {
        if data.is_empty() {
            return Ok(f64::NAN);
        }
        let mut total = 0.0;
        for t in data {
            let pred = self.predict_delta(&t.state, &t.action)?;
            let y = target_of(t);
            total += pred.iter().zip(&y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y.len() as f64;
        }
        Ok(total / data.len() as f64)
    }
}

impl TransitionModel for DynamicsModel {
    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn is_trained(&self) -> bool {
        self.input_scale.is_some()
    }

    fn predict(&self, state: &[f64], action: &[f64]) -> Result<(Vec<f64>, f64), DynaError> {
        let d = self.predict_delta(state, action)?;
        let next = state.iter().zip(&d).map(|(s, ds)| s + ds).collect();
        Ok((next, d[self.obs_dim]))
    }
}

/// Fits `model` to real transitions by squared error on standardized
/// `(Δs, r)` targets.
///
/// Uses the most recent `window` real transitions (all if `None`), split
/// 90/10 by insertion order into training and validation parts. Reported
/// errors are per-component means in original units.
pub fn train_dynamics<R: Rng + ?Sized>(
    model: &mut DynamicsModel,
    buffer: &ReplayBuffer,
    window: Option<usize>,
    epochs: usize,
    lr: f64,
    minibatch: usize,
    rng: &mut R,
) -> Result<FitOutcome, DynaError> {
    let real: Vec<&Transition> = buffer.iter().filter(|t| t.source == Source::Real).collect();
    let start = window.map_or(0, |w| real.len().saturating_sub(w));
    let data = &real[start..];
    if data.len() < minibatch.max(2) {
        log::info!("skipping dynamics fit: {} real transitions, need {}", data.len(), minibatch.max(2));
        return Ok(FitOutcome::Skipped { available: data.len(), required: minibatch.max(2) });
    }
    let split = ((data.len() as f64) * 0.9).round().clamp(1.0, (data.len() - 1) as f64) as usize;
    let (train, valid) = data.split_at(split);

    if model.input_scale.is_none() {
        let xs: Vec<Vec<f64>> = train.iter().map(|t| input_of(t)).collect();
        let ys: Vec<Vec<f64>> = train.iter().map(|t| target_of(t)).collect();
        model.input_scale = Some(Scaler::fit(xs.iter().map(Vec::as_slice), model.obs_dim + model.action_dim));
        model.target_scale = Some(Scaler::fit(ys.iter().map(Vec::as_slice), model.obs_dim + 1));
    }
    let xs = model.input_scale.clone().unwrap();
    let ys = model.target_scale.clone().unwrap();
    let inputs: Vec<Vec<f64>> = train.iter().map(|t| xs.apply(&input_of(t))).collect();
    let targets: Vec<Vec<f64>> = train.iter().map(|t| ys.apply(&target_of(t))).collect();
    let rates: LayerRates = model.net.params.layers().iter().map(|l| (l.name.clone(), lr)).collect();
    let out_dim = model.obs_dim + 1;

    let mut grads = model.net.params.zeros_like();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut upstream = vec![0.0; out_dim];
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch) {
            grads.fill_zero();
            let scale = 2.0 / (chunk.len() * out_dim) as f64;
            for &i in chunk {
                let cache = model.net.forward_cached(&inputs[i])?;
                for (u, (p, y)) in upstream.iter_mut().zip(cache.output().iter().zip(&targets[i])) {
                    *u = scale * (p - y);
                }
                model.net.backward_accumulate(&cache, &upstream, &mut grads);
            }
            if !grads.values().all(|g| g.is_finite()) {
                return Err(DynaError::NonFinite("dynamics gradient".into()));
            }
            model.opt.step(&mut model.net.params, &grads, &rates)?;
        }
    }
    Ok(FitOutcome::Fitted { train_mse: model.mse(train)?, validation_mse: model.mse(valid)? })
}
