use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::orthogonal;
use super::params::{Layer, ParamStore};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: &mut [f64]) {
        if let Activation::Tanh = self {
            v.iter_mut().for_each(|x| *x = x.tanh());
        }
    }

    /// Scales `delta` by the derivative, expressed through the post-activation output.
    #[inline]
    fn backprop(self, output: &[f64], delta: &mut [f64]) {
        if let Activation::Tanh = self {
            for (d, y) in delta.iter_mut().zip(output) {
                *d *= 1.0 - y * y;
            }
        }
    }
}

/// Topology of a dense network: widths (input first) and one activation per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    /// Tanh on every hidden layer, identity on the output.
    pub fn new(layer_dims: Vec<usize>) -> Result<Self, NnError> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(NnError::BadSpec(format!("{layer_dims:?}")));
        }
        let n = layer_dims.len() - 1;
        let mut activations = vec![Activation::Tanh; n];
        activations[n - 1] = Activation::Identity;
        Ok(Self { layer_dims, activations })
    }

    pub fn with_activations(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self, NnError> {
        let mut spec = Self::new(layer_dims)?;
        if activations.len() != spec.num_layers() {
            return Err(NnError::BadSpec(format!(
                "{} activations for {} layers",
                activations.len(),
                spec.num_layers()
            )));
        }
        spec.activations = activations;
        Ok(spec)
    }

    pub fn with_output_activation(mut self, act: Activation) -> Self {
        let n = self.activations.len();
        self.activations[n - 1] = act;
        self
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Confirms `params` has exactly this topology.
    pub fn check(&self, params: &ParamStore) -> Result<(), NnError> {
        if params.len() != self.num_layers() {
            return Err(NnError::Dimension {
                layer: format!("<{} layers>", params.len()),
                detail: format!("spec expects {} layers", self.num_layers()),
            });
        }
        for (k, layer) in params.layers().iter().enumerate() {
            let (cols, rows) = (self.layer_dims[k], self.layer_dims[k + 1]);
            if layer.cols != cols || layer.rows != rows {
                return Err(NnError::Dimension {
                    layer: layer.name.clone(),
                    detail: format!("expected {cols}->{rows}, found {}->{}", layer.cols, layer.rows),
                });
            }
        }
        Ok(())
    }

    /// Orthogonal init: gain √2 on hidden layers, `output_gain` on the last, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, names: &[String], output_gain: f64, rng: &mut R) -> ParamStore {
        assert_eq!(names.len(), self.num_layers());
        let n = self.num_layers();
        let layers = (0..n)
            .map(|k| {
                let (cols, rows) = (self.layer_dims[k], self.layer_dims[k + 1]);
                let gain = if k + 1 == n { output_gain } else { std::f64::consts::SQRT_2 };
                Layer {
                    name: names[k].clone(),
                    rows,
                    cols,
                    weight: orthogonal(rows, cols, gain, rng),
                    bias: vec![0.0; rows],
                }
            })
            .collect();
        ParamStore::from_layers_unchecked(layers)
    }
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    input: Vec<f64>,
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&self.input)
    }

    /// Post-activation output of layer `k`.
    pub fn layer_output(&self, k: usize) -> &[f64] {
        &self.outputs[k]
    }
}

fn check_input(spec: &MlpSpec, params: &ParamStore, x: &[f64]) -> Result<(), NnError> {
    spec.check(params)?;
    if x.len() != spec.input_dim() {
        return Err(NnError::Dimension {
            layer: params.layers()[0].name.clone(),
            detail: format!("input has length {}, expected {}", x.len(), spec.input_dim()),
        });
    }
    Ok(())
}

/// Forward pass through a dense network.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamStore, x: &[f64]) -> Result<Vec<f64>, NnError> {
    check_input(spec, params, x)?;
    Ok(forward_unchecked(spec, params, x))
}

/// Gradient of `upstream · output` with respect to every weight and bias.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamStore,
    x: &[f64],
    upstream: &[f64],
) -> Result<ParamStore, NnError> {
    check_input(spec, params, x)?;
    if upstream.len() != spec.output_dim() {
        return Err(NnError::Dimension {
            layer: params.layers().last().unwrap().name.clone(),
            detail: format!("upstream gradient has length {}, expected {}", upstream.len(), spec.output_dim()),
        });
    }
    let cache = forward_cached_unchecked(spec, params, x);
    let mut grads = params.zeros_like();
    backward_unchecked(spec, params, &cache, upstream, &mut grads);
    Ok(grads)
}

pub(crate) fn forward_unchecked(spec: &MlpSpec, params: &ParamStore, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (layer, act) in params.layers().iter().zip(&spec.activations) {
        let mut next = vec![0.0; layer.rows];
        layer.affine_into(&cur, &mut next);
        act.apply(&mut next);
        cur = next;
    }
    cur
}

pub(crate) fn forward_cached_unchecked(spec: &MlpSpec, params: &ParamStore, x: &[f64]) -> ForwardCache {
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(params.len());
    for (k, (layer, act)) in params.layers().iter().zip(&spec.activations).enumerate() {
        let inp = if k == 0 { x } else { outputs[k - 1].as_slice() };
        let mut next = vec![0.0; layer.rows];
        layer.affine_into(inp, &mut next);
        act.apply(&mut next);
        outputs.push(next);
    }
    ForwardCache { input: x.to_vec(), outputs }
}

/// Accumulates parameter gradients into `grads` and returns the gradient w.r.t. the input.
pub(crate) fn backward_unchecked(
    spec: &MlpSpec,
    params: &ParamStore,
    cache: &ForwardCache,
    upstream: &[f64],
    grads: &mut ParamStore,
) -> Vec<f64> {
    let layers = params.layers();
    let mut delta = upstream.to_vec();
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        spec.activations[k].backprop(&cache.outputs[k], &mut delta);
        let inp = if k == 0 { &cache.input } else { &cache.outputs[k - 1] };
        let g = &mut grads.layers_mut()[k];
        for (r, d) in delta.iter().enumerate() {
            g.bias[r] += d;
            if *d != 0.0 {
                let row = &mut g.weight[r * layer.cols..(r + 1) * layer.cols];
                row.iter_mut().zip(inp).for_each(|(w, xi)| *w += d * xi);
            }
        }
        let mut prev = vec![0.0; layer.cols];
        for (r, d) in delta.iter().enumerate() {
            if *d != 0.0 {
                let row = &layer.weight[r * layer.cols..(r + 1) * layer.cols];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
        }
        delta = prev;
    }
    delta
}

/// A dense network: topology plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: ParamStore,
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: ParamStore) -> Result<Self, NnError> {
        spec.check(&params)?;
        Ok(Self { spec, params })
    }

    /// Randomly initialized network whose layers are named `{prefix}{k}`.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, prefix: &str, output_gain: f64, rng: &mut R) -> Self {
        let names: Vec<String> = (0..spec.num_layers()).map(|k| format!("{prefix}{k}")).collect();
        let params = spec.init_params(&names, output_gain, rng);
        Self { spec, params }
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension {
                layer: self.params.layers()[0].name.clone(),
                detail: format!("input has length {}, expected {}", x.len(), self.input_dim()),
            });
        }
        Ok(forward_unchecked(&self.spec, &self.params, x))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension {
                layer: self.params.layers()[0].name.clone(),
                detail: format!("input has length {}, expected {}", x.len(), self.input_dim()),
            });
        }
        Ok(forward_cached_unchecked(&self.spec, &self.params, x))
    }

    /// Adds ∂(upstream·output)/∂θ into `grads`; returns ∂(upstream·output)/∂x.
    pub fn backward_accumulate(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut ParamStore) -> Vec<f64> {
        debug_assert_eq!(upstream.len(), self.output_dim());
        backward_unchecked(&self.spec, &self.params, cache, upstream, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_single_layer() {
        let spec = MlpSpec::new(vec![2, 2]).unwrap();
        let params = ParamStore::new(vec![Layer::new("l0", 2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap()]).unwrap();
        let y = mlp_forward(&spec, &params, &[0.3, -0.7]).unwrap();
        assert_eq!(y, vec![0.3, -0.7]);
    }

    #[test]
    fn zero_weights_give_final_bias() {
        let spec = MlpSpec::new(vec![3, 5, 2]).unwrap();
        let mut params = ParamStore::new(vec![Layer::zeros("l0", 5, 3), Layer::zeros("l1", 2, 5)]).unwrap();
        params.layers_mut()[0].bias = vec![0.4; 5];
        params.layers_mut()[1].bias = vec![1.5, -2.5];
        for x in [[0.0, 0.0, 0.0], [9.0, -3.0, 1e3]] {
            assert_eq!(mlp_forward(&spec, &params, &x).unwrap(), vec![1.5, -2.5]);
        }
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let spec = MlpSpec::new(vec![3, 4, 1]).unwrap();
        let params = ParamStore::new(vec![Layer::zeros("first", 4, 3), Layer::zeros("second", 1, 4)]).unwrap();
        let err = mlp_forward(&spec, &params, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("first"), "{err}");

        let wrong = MlpSpec::new(vec![3, 5, 1]).unwrap();
        let err = mlp_forward(&wrong, &params, &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(err.to_string().contains("first"), "{err}");
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(MlpSpec::new(vec![4, 8, 1]).unwrap(), "l", 1.0, &mut rng);
        let g = mlp_backward(&net.spec, &net.params, &[0.1, 0.2, 0.3, 0.4], &[0.0]).unwrap();
        assert!(g.values().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let spec = MlpSpec::new(vec![3, 2]).unwrap();
        let params = ParamStore::new(vec![Layer::new("l0", 2, 3, vec![0.5, -1.0, 2.0, 0.1, 0.2, 0.3], vec![1.0, -1.0]).unwrap()]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let g = [3.0, -0.25];
        let grads = mlp_backward(&spec, &params, &x, &g).unwrap();
        let l = &grads.layers()[0];
        for r in 0..2 {
            assert_eq!(l.bias[r], g[r]);
            for c in 0..3 {
                assert_eq!(l.weight[r * 3 + c], g[r] * x[c]);
            }
        }
    }

    #[test]
    fn orthogonal_init_has_orthonormal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::init(MlpSpec::new(vec![8, 4]).unwrap(), "l", 1.0, &mut rng);
        let w = &net.params.layers()[0].weight;
        for a in 0..4 {
            for b in 0..4 {
                let d: f64 = (0..8).map(|c| w[a * 8 + c] * w[b * 8 + c]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12, "{a},{b}: {d}");
            }
        }
    }
}
