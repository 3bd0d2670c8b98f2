//! Operator networks: MITONet and the DeepONet-family baselines.

mod baselines;
mod container;
mod fusion;
mod gated;
mod mitonet;
mod objective;
mod scaling;

pub use baselines::{baseline_forward, BaselineConfig, BaselineModel, BaselineSample};
pub use container::{content_hash, OperatorParts, Variant, OPERATOR_MAGIC};
pub use fusion::fuse;
pub use gated::{check_gated, gated_backward_acc, gated_forward, gated_forward_taped, GatedTape};
pub use mitonet::{
    encoder_embeddings, mitonet_forward, MitonetConfig, MitonetModel, MitonetTape, OperatorSample,
};
pub use objective::{
    mean_sample_loss, model_penalty, operator_loss, train_samples, OperatorGrads, SampleModel,
    SampleObjective,
};
pub use scaling::OperatorScaling;
