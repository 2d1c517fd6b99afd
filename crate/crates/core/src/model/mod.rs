//! Encoder-decoder design model: an all-atom attention encoder, residue
//! graph attention layers, and a causal decoder with pair-biased global
//! attention. A residue/atom convolution over local frames is provided for
//! interface graphs.

mod attention;
mod caconv;
mod config;
mod egat;
mod gat;
mod inputs;
mod layers;
mod loss;
mod network;
mod noise;
mod order;
mod train;

pub use attention::{PairAttentionOutput, PairBiasAttention};
pub use caconv::{CaConv, CaConvOutput};
pub use config::ModelConfig;
pub use egat::{EgatLayer, PaddedNeighbors};
pub use gat::{GatLayer, GatOutput, NeighborLayout};
pub use inputs::{ComplexInputs, FEATURES_KIND, PAIR_STRUCT_WIDTH};
pub use layers::{Linear, Mlp};
pub use loss::{edge_loss, node_loss, pair_label, total_loss, NodeMask};
pub use network::{Encoded, EncoderCache, RedNet};
pub use noise::add_coordinate_noise;
pub use order::DecodingOrder;
pub use train::{native_recovery, train_toy, TrainConfig, TrainReport};

use thiserror::Error;

use crate::container::ContainerError;
use crate::featurize::FeatureError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("invalid decoding order: {0}")]
    Order(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("weight file mismatch: {0}")]
    Weights(String),
    #[error("token sequence length {got} does not match {expected} residues")]
    Tokens { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, ModelError>;
