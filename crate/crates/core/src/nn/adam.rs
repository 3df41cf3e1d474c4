use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::NnError;

/// Learning rate per layer name. Extra parameter vectors (e.g. `log_std`) are keyed the same way.
pub type LayerRates = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// A parameter vector that lives outside a [`ParamStore`], stepped alongside it.
pub struct ExtraParam<'a> {
    pub name: &'a str,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Adam moments for one network, with a learning rate chosen per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    t: u64,
    moments: BTreeMap<String, Moments>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(AdamConfig::default())
    }
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, moments: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore, rates: &LayerRates) -> Result<(), NnError> {
        self.step_with_extra(params, grads, &mut [], rates)
    }

    /// One Adam update over every layer of `params` plus any extra vectors.
    ///
    /// Fails without touching anything if a layer has no assigned rate or the
    /// gradient shapes disagree.
    pub fn step_with_extra(
        &mut self,
        params: &mut ParamStore,
        grads: &ParamStore,
        extras: &mut [ExtraParam<'_>],
        rates: &LayerRates,
    ) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::Shape(format!("{} param layers vs {} grad layers", params.len(), grads.len())));
        }
        for (p, g) in params.layers().iter().zip(grads.layers()) {
            if p.rows != g.rows || p.cols != g.cols {
                return Err(NnError::Dimension { layer: p.name.clone(), detail: "gradient shape differs".into() });
            }
            if !rates.contains_key(&p.name) {
                return Err(NnError::UnassignedLayer(p.name.clone()));
            }
        }
        for e in extras.iter() {
            if e.value.len() != e.grad.len() {
                return Err(NnError::Shape(format!("extra `{}`", e.name)));
            }
            if !rates.contains_key(e.name) {
                return Err(NnError::UnassignedLayer(e.name.to_string()));
            }
        }

        self.t += 1;
        let cfg = self.config;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let mut apply = |key: String, value: &mut [f64], grad: &[f64], lr: f64| {
            let mom = self.moments.entry(key).or_insert_with(|| Moments {
                m: vec![0.0; value.len()],
                v: vec![0.0; value.len()],
            });
            for i in 0..value.len() {
                let g = grad[i];
                mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
                mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
                if lr != 0.0 {
                    let m_hat = mom.m[i] / bc1;
                    let v_hat = mom.v[i] / bc2;
                    value[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
                }
            }
        };
        for (p, g) in params.layers_mut().iter_mut().zip(grads.layers()) {
            let lr = rates[&p.name];
            apply(format!("{}.weight", p.name), &mut p.weight, &g.weight, lr);
            apply(format!("{}.bias", p.name), &mut p.bias, &g.bias, lr);
        }
        for e in extras.iter_mut() {
            let lr = rates[e.name];
            apply(e.name.to_string(), e.value, e.grad, lr);
        }
        Ok(())
    }
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(stores: &mut [&mut ParamStore], extras: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let sq: f64 = stores.iter().map(|s| s.sq_norm()).sum::<f64>()
        + extras.iter().map(|e| e.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for s in stores.iter_mut() {
            s.scale(factor);
        }
        for e in extras.iter_mut() {
            e.iter_mut().for_each(|v| *v *= factor);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Layer;

    fn scalar(v: f64) -> ParamStore {
        ParamStore::new(vec![Layer::new("w", 1, 1, vec![v], vec![0.0]).unwrap()]).unwrap()
    }

    fn rates(pairs: &[(&str, f64)]) -> LayerRates {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn one_step_hand_computation() {
        let mut p = scalar(0.0);
        let mut g = scalar(1.0);
        g.layers_mut()[0].bias[0] = 0.0;
        let mut adam = AdamState::default();
        adam.step(&mut p, &g, &rates(&[("w", 0.1)])).unwrap();
        let delta = p.layers()[0].weight[0];
        // m̂ = 1, v̂ = 1 → −0.1 / (1 + 1e-8)
        assert!((delta - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((delta + 0.099_999_999).abs() < 1e-9);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = scalar(0.7);
        let g = p.zeros_like();
        let before = p.clone();
        let mut adam = AdamState::default();
        for _ in 0..5 {
            adam.step(&mut p, &g, &rates(&[("w", 0.1)])).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn frozen_group_bit_identical() {
        let mut p = ParamStore::new(vec![
            Layer::new("core", 1, 2, vec![0.123, -4.5], vec![1e-3]).unwrap(),
            Layer::new("head", 1, 1, vec![2.0], vec![0.0]).unwrap(),
        ])
        .unwrap();
        let mut g = p.clone();
        g.values_mut().for_each(|v| *v = 0.5);
        let core_before = p.layers()[0].clone();
        let head_before = p.layers()[1].clone();
        let mut adam = AdamState::default();
        let r = rates(&[("core", 0.0), ("head", 1e-2)]);
        for _ in 0..3 {
            adam.step(&mut p, &g, &r).unwrap();
        }
        assert_eq!(p.layers()[0], core_before);
        assert_ne!(p.layers()[1], head_before);
    }

    #[test]
    fn unassigned_layer_errors_without_mutation() {
        let mut p = scalar(1.0);
        let g = scalar(1.0);
        let mut adam = AdamState::default();
        let err = adam.step(&mut p, &g, &rates(&[("other", 0.1)])).unwrap_err();
        assert!(matches!(err, NnError::UnassignedLayer(ref n) if n == "w"));
        assert_eq!(adam.steps(), 0);
        assert_eq!(p, scalar(1.0));
    }

    #[test]
    fn extras_are_stepped() {
        let mut p = scalar(0.0);
        let g = p.zeros_like();
        let mut ls = vec![0.0, 0.0];
        let gls = [1.0, -1.0];
        let mut adam = AdamState::default();
        adam.step_with_extra(
            &mut p,
            &g,
            &mut [ExtraParam { name: "log_std", value: &mut ls, grad: &gls }],
            &rates(&[("w", 0.1), ("log_std", 0.1)]),
        )
        .unwrap();
        assert!(ls[0] < 0.0 && ls[1] > 0.0);
    }

    #[test]
    fn clip_norm_scales_jointly() {
        let mut a = scalar(3.0);
        a.layers_mut()[0].bias[0] = 0.0;
        let mut e = vec![4.0];
        let n = clip_grad_norm(&mut [&mut a], &mut [&mut e], 1.0);
        assert!((n - 5.0).abs() < 1e-12);
        assert!((a.layers()[0].weight[0] - 0.6).abs() < 1e-12);
        assert!((e[0] - 0.8).abs() < 1e-12);
    }
}
