//! Pretrained-core PPO: pretraining on a source task, core extraction, and
//! the adapter sandwich trained with separate learning rates for the core and
//! for everything around it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envsim::{EnvSpec, Environment};
use crate::nn::{mlp_forward, orthogonal, Activation, GaussianPolicy, Layer, LayerRates, Mlp, MlpSpec, NnError, ParamStore};
use crate::ppo::{build_value, run_ppo_loop, train_ppo, LearningCurve, PpoError, PpoHyper, UpdateDiagnostics, LOG_STD_KEY};

/// Hidden widths of the pretrained core.
pub const CORE_HIDDEN: [usize; 2] = [128, 128];

pub const INPUT_ADAPTER: &str = "input_adapter";
pub const INPUT_FINETUNE: &str = "input_finetune";
pub const OUTPUT_FINETUNE: &str = "output_finetune";
pub const OUTPUT_ADAPTER: &str = "output_adapter";
const CORE_PREFIX: &str = "core.";
/// Index of the first core layer inside the sandwich.
const CORE_START: usize = 2;
const CORE_LAYERS: usize = CORE_HIDDEN.len() + 1;

#[derive(Debug, thiserror::Error)]
pub enum PpoptError {
    #[error("core topology mismatch: expected {expected}, found {found:?}")]
    Topology { expected: String, found: Vec<usize> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Learning-rate group of a sandwich parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrGroup {
    Adapter,
    Core,
}

/// Group of the layer (or `log_std`) called `name`.
pub fn lr_group(name: &str) -> LrGroup {
    if name.starts_with(CORE_PREFIX) {
        LrGroup::Core
    } else {
        LrGroup::Adapter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoptHyper {
    /// PPO settings for the source task; the policy uses `CORE_HIDDEN` regardless of `policy_hidden`.
    pub pretrain: PpoHyper,
    /// PPO settings for the target task. `learning_rate` drives the value network.
    pub train: PpoHyper,
    pub adapter_lr: f64,
    pub core_lr: f64,
    /// Set from the experiment budget; not part of the serialized form.
    #[serde(skip)]
    pub pretrain_episodes: usize,
    #[serde(skip)]
    pub train_episodes: usize,
    /// Identity instead of tanh on every layer outside the core.
    pub linear_adapters: bool,
}

impl Default for PpoptHyper {
    fn default() -> Self {
        Self {
            pretrain: PpoHyper {
                steps_per_iteration: 2048,
                learning_rate: 1e-3,
                policy_hidden: CORE_HIDDEN.to_vec(),
                value_hidden: CORE_HIDDEN.to_vec(),
                ..PpoHyper::default()
            },
            train: PpoHyper { value_hidden: CORE_HIDDEN.to_vec(), ..PpoHyper::default() },
            adapter_lr: 3e-4,
            core_lr: 1e-4,
            pretrain_episodes: 600,
            train_episodes: 200,
            linear_adapters: false,
        }
    }
}

impl PpoptHyper {
    pub fn validate(&self) -> Result<(), PpoptError> {
        self.pretrain.validate()?;
        self.train.validate()?;
        if !(self.adapter_lr >= 0.0) || !(self.core_lr >= 0.0) {
            return Err(PpoptError::Config("learning rates must be non-negative".into()));
        }
        if self.core_lr > self.adapter_lr {
            return Err(PpoptError::Config(format!(
                "core_lr {} exceeds adapter_lr {}",
                self.core_lr, self.adapter_lr
            )));
        }
        if self.pretrain_episodes == 0 || self.train_episodes == 0 {
            return Err(PpoptError::Config("episode budgets must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of training on the source task.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub policy: GaussianPolicy,
    pub curve: LearningCurve,
}

/// PPO on the source task with a `CORE_HIDDEN` policy; the value network is dropped.
///
/// The returned parameters are rounded to `f32` so that a transplant from a
/// parameter file and one from memory are identical.
pub fn pretrain<R: Rng + ?Sized>(pre_env: &mut dyn Environment, hyper: &PpoptHyper, rng: &mut R) -> Result<Pretrained, PpoptError> {
    let ppo = PpoHyper { policy_hidden: CORE_HIDDEN.to_vec(), ..hyper.pretrain.clone() };
    let mut run = train_ppo(pre_env, &ppo, hyper.pretrain_episodes, rng)?;
    run.policy.net.params.round_to_f32();
    run.policy.log_std.iter_mut().for_each(|v| *v = *v as f32 as f64);
    Ok(Pretrained { policy: run.policy, curve: run.curve })
}

/// The whole pretrained policy network, checked to be `[in, 128, 128, out]`.
pub fn extract_core(pretrained: &ParamStore) -> Result<ParamStore, PpoptError> {
    let dims = pretrained.dims();
    if dims.len() != CORE_LAYERS + 1 || dims[1..=CORE_HIDDEN.len()] != CORE_HIDDEN {
        return Err(PpoptError::Topology {
            expected: format!("[in, {}, {}, out]", CORE_HIDDEN[0], CORE_HIDDEN[1]),
            found: dims,
        });
    }
    Ok(pretrained.clone())
}

/// Forward pass of a standalone core: tanh hidden layers, identity output.
pub fn core_forward(core: &ParamStore, x: &[f64]) -> Result<Vec<f64>, NnError> {
    let spec = MlpSpec::new(core.dims())?;
    mlp_forward(&spec, core, x)
}

/// Five-section policy: input adapter, input fine-tune, core, output
/// fine-tune, output adapter, held as one network with named layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichPolicy {
    pub policy: GaussianPolicy,
    pub pre_obs_dim: usize,
    pub pre_act_dim: usize,
}

impl SandwichPolicy {
    /// Core layers as a standalone store (names as in the sandwich).
    pub fn core(&self) -> ParamStore {
        self.policy.net.params.slice(CORE_START..CORE_START + CORE_LAYERS)
    }

    /// Core section alone applied to an intermediate vector, before the
    /// activation that follows the section.
    pub fn core_section_forward(&self, v: &[f64]) -> Result<Vec<f64>, NnError> {
        core_forward(&self.core(), v)
    }

    /// Every non-core layer.
    pub fn adapter_layers(&self) -> Vec<&Layer> {
        self.policy.net.params.layers().iter().filter(|l| lr_group(&l.name) == LrGroup::Adapter).collect()
    }

    /// Per-layer rates: core layers at `core_lr`, everything else and `log_std` at `adapter_lr`.
    pub fn rates(&self, adapter_lr: f64, core_lr: f64) -> LayerRates {
        let mut rates: LayerRates = self
            .policy
            .net
            .params
            .layers()
            .iter()
            .map(|l| {
                let lr = match lr_group(&l.name) {
                    LrGroup::Core => core_lr,
                    LrGroup::Adapter => adapter_lr,
                };
                (l.name.clone(), lr)
            })
            .collect();
        rates.insert(LOG_STD_KEY.to_string(), adapter_lr);
        rates
    }

    /// Parameter count per group, `log_std` included in the adapter group.
    pub fn group_param_counts(&self) -> (usize, usize) {
        let mut adapter = self.policy.log_std.len();
        let mut core = 0;
        for l in self.policy.net.params.layers() {
            match lr_group(&l.name) {
                LrGroup::Adapter => adapter += l.num_params(),
                LrGroup::Core => core += l.num_params(),
            }
        }
        (adapter, core)
    }

    pub fn num_params(&self) -> usize {
        self.policy.num_params()
    }
}

fn fresh_layer<R: Rng + ?Sized>(name: &str, rows: usize, cols: usize, gain: f64, rng: &mut R) -> Layer {
    Layer { name: name.to_string(), rows, cols, weight: orthogonal(rows, cols, gain, rng), bias: vec![0.0; rows] }
}

/// Wraps `core` between freshly initialized adapter and fine-tune layers.
pub fn build_sandwich<R: Rng + ?Sized>(
    target: &EnvSpec,
    pre: &EnvSpec,
    core: &ParamStore,
    linear_adapters: bool,
    rng: &mut R,
) -> Result<SandwichPolicy, PpoptError> {
    let dims = core.dims();
    let core = extract_core(core)?;
    if dims[0] != pre.obs_dim || dims[dims.len() - 1] != pre.action_dim {
        return Err(PpoptError::Dimension(format!(
            "core maps {} -> {} but the pretraining task has {} observations and {} actions",
            dims[0],
            dims[dims.len() - 1],
            pre.obs_dim,
            pre.action_dim
        )));
    }
    let (to, ta, po, pa) = (target.obs_dim, target.action_dim, pre.obs_dim, pre.action_dim);
    let hidden_gain = std::f64::consts::SQRT_2;
    let mut layers = vec![
        fresh_layer(INPUT_ADAPTER, po, to, hidden_gain, rng),
        fresh_layer(INPUT_FINETUNE, po, po, hidden_gain, rng),
    ];
    for (k, l) in core.layers().iter().enumerate() {
        layers.push(Layer { name: format!("{CORE_PREFIX}{k}"), ..l.clone() });
    }
    layers.push(fresh_layer(OUTPUT_FINETUNE, pa, pa, hidden_gain, rng));
    layers.push(fresh_layer(OUTPUT_ADAPTER, ta, pa, 0.01, rng));
    let params = ParamStore::new(layers)?;

    let mut layer_dims = vec![to, po];
    layer_dims.extend_from_slice(&dims);
    layer_dims.extend([pa, ta]);
    let outer = if linear_adapters { Activation::Identity } else { Activation::Tanh };
    let activations = vec![outer, outer, Activation::Tanh, Activation::Tanh, outer, outer, Activation::Identity];
    let spec = MlpSpec::with_activations(layer_dims, activations)?;
    let net = Mlp::new(spec, params)?;
    Ok(SandwichPolicy { policy: GaussianPolicy::new(net), pre_obs_dim: po, pre_act_dim: pa })
}

/// Action mean of the sandwich.
pub fn sandwich_forward(sandwich: &SandwichPolicy, obs: &[f64]) -> Result<Vec<f64>, NnError> {
    sandwich.policy.mean(obs)
}

/// Outcome of main training.
#[derive(Debug, Clone)]
pub struct PpoptRun {
    pub sandwich: SandwichPolicy,
    pub value: Mlp,
    pub curve: LearningCurve,
    pub updates: Vec<UpdateDiagnostics>,
}

/// PPO on the target task through all five sections, with both rate groups
/// decaying linearly over the episode budget.
pub fn ppopt_train<R: Rng + ?Sized>(
    target_env: &mut dyn Environment,
    mut sandwich: SandwichPolicy,
    mut value_net: Mlp,
    hyper: &PpoptHyper,
    rng: &mut R,
) -> Result<PpoptRun, PpoptError> {
    hyper.validate()?;
    let spec = target_env.spec();
    if sandwich.policy.obs_dim() != spec.obs_dim || sandwich.policy.action_dim() != spec.action_dim {
        return Err(PpoptError::Dimension(format!(
            "sandwich maps {} -> {}, environment has {} observations and {} actions",
            sandwich.policy.obs_dim(),
            sandwich.policy.action_dim(),
            spec.obs_dim,
            spec.action_dim
        )));
    }
    if value_net.input_dim() != spec.obs_dim || value_net.output_dim() != 1 {
        return Err(PpoptError::Dimension("value network must map observations to a scalar".into()));
    }
    let rates = sandwich.rates(hyper.adapter_lr, hyper.core_lr);
    let (curve, updates) = run_ppo_loop(
        target_env,
        &mut sandwich.policy,
        &mut value_net,
        &hyper.train,
        &rates,
        hyper.train.learning_rate,
        hyper.train_episodes,
        rng,
    )?;
    Ok(PpoptRun { sandwich, value: value_net, curve, updates })
}

/// Builds a sandwich around `core` plus a fresh value network, then trains.
pub fn train_from_core<R: Rng + ?Sized>(
    target_env: &mut dyn Environment,
    pre_spec: &EnvSpec,
    core: &ParamStore,
    hyper: &PpoptHyper,
    rng: &mut R,
) -> Result<PpoptRun, PpoptError> {
    let target = target_env.spec();
    let sandwich = build_sandwich(&target, pre_spec, core, hyper.linear_adapters, rng)?;
    let value = build_value(target.obs_dim, &hyper.train.value_hidden, rng);
    ppopt_train(target_env, sandwich, value, hyper, rng)
}
