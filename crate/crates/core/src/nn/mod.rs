//! The secure transformer: model definition and weight IO, MPC kernels for
//! each block, and autoregressive decoding with key/value caching.

mod generate;
mod kernels;
mod model;

pub use generate::{
    embed_rows, onehot_to_token, secure_generate, secure_generate_secret,
};
pub use kernels::{
    causal_mask, mpc_attention, mpc_gelu, mpc_layernorm, mpc_linear, mpc_softmax, secure_forward,
    transpose, KvCache, LAYERNORM_EPS, MASK_PENALTY,
};
pub use model::{
    EncodedLayer, EncodedModel, GeluMode, LayerWeights, ModelConfig, ModelWeights, PublicTensor,
    WeightRepr, WEIGHT_MAGIC, WEIGHT_VERSION,
};
