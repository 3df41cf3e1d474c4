//! Dense-network numerics: forward/backward passes, a diagonal Gaussian
//! action head, Adam with per-layer learning rates and parameter files.

mod adam;
mod gaussian;
mod init;
mod io;
mod mlp;
mod params;
mod policy;

pub use adam::{clip_grad_norm, AdamConfig, AdamState, ExtraParam, LayerRates};
pub use gaussian::{clamp_log_std, gaussian_entropy, gaussian_log_prob, sample_action, LOG_STD_MAX, LOG_STD_MIN};
pub(crate) use gaussian::{log_prob_grads, log_prob_unchecked};
pub use init::orthogonal;
pub use io::{
    deserialize_params, params_hash, read_param_file, serialize_params, write_param_file, FormatError, ParamFile,
    ParamFileError, FORMAT_VERSION, MAGIC,
};
pub use mlp::{mlp_backward, mlp_forward, Activation, ForwardCache, Mlp, MlpSpec};
pub use params::{Layer, ParamStore};
pub use policy::GaussianPolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch at layer `{layer}`: {detail}")]
    Dimension { layer: String, detail: String },
    #[error("invalid network spec {0}")]
    BadSpec(String),
    #[error("non-finite parameter in layer `{0}`")]
    NonFinite(String),
    #[error("duplicate layer name `{0}`")]
    DuplicateLayer(String),
    #[error("layer `{0}` has no learning-rate group")]
    UnassignedLayer(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}
